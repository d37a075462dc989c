import numpy as np
import pytest

from evcodec.core_model import Frame
from evcodec.counters import counters
from evcodec.synthetic import pan_sequence, translating_sequence


@pytest.fixture(autouse=True)
def _reset_counters():
    counters.reset()
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_frame(rng, h=64, w=64, poc=0, timestamp=0):
    return Frame(rng.integers(0, 256, (h, w), dtype=np.uint8), poc, timestamp)


def natural_clip(n_frames=9, size=(96, 96), step=(1, 1)):
    from skimage import data

    canvas = data.camera().astype(np.float64)
    return pan_sequence(canvas, [(step[0] * i, step[1] * i) for i in range(n_frames)], size)


@pytest.fixture(scope="session")
def translation_128():
    return translating_sequence(9, size=(128, 128), velocity=(2, 0), seed=0)


# acceptance reporting ------------------------------------------------------------

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """``acceptance(n, ok, detail)`` records one criterion result and asserts it."""

    def record(n, ok, detail):
        _ACCEPTANCE[str(n)] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE, key=lambda k: (int(k.split()[0]), k)):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
