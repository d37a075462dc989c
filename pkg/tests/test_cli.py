import json
import subprocess
import sys

import pytest

from evcodec.cli import main
from evcodec.pgm import read_sequence, write_sequence
from evcodec.synthetic import translating_sequence


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    write_sequence(d / "gt", translating_sequence(9, size=(32, 48), velocity=(1, 0), seed=5))
    assert main(["simulate-events", "--frames", str(d / "gt"), "--out", str(d / "sim")]) == 0
    return d


def test_simulate_outputs(workdir):
    keys = read_sequence(workdir / "sim" / "keyframes", 1)
    assert [k.poc for k in keys] == [0, 4, 8]
    assert (workdir / "sim" / "events.evt1").read_bytes()[:4] == b"EVT1"


def test_encode_decode_metrics(workdir, capsys):
    d = workdir
    args = ["encode", "--frames", str(d / "sim" / "keyframes"), "--events", str(d / "sim" / "events.evt1"),
            "--qp", "20"]
    assert main(args + ["--out", str(d / "a.evc"), "--report", str(d / "a.json")]) == 0
    assert main(args + ["--out", str(d / "b.evc")]) == 0
    assert (d / "a.evc").read_bytes() == (d / "b.evc").read_bytes()
    rep = json.loads((d / "a.json").read_text())
    assert rep["totals"]["frame_count"] == 9
    assert main(["decode", str(d / "a.evc"), "--out", str(d / "dec")]) == 0
    assert len(read_sequence(d / "dec", 1)) == 9
    assert main(["metrics", "--frames", str(d / "gt"), "--decoded", str(d / "dec"), "--stream", str(d / "a.evc"),
                 "--report", str(d / "m.json")]) == 0
    m = json.loads((d / "m.json").read_text())
    assert len(m["frames"]) == 9 and m["mean_psnr_db"] > 25


def test_compare_report(workdir):
    d = workdir
    assert main(["compare", "--frames", str(d / "gt"), "--qp", "16", "--report", str(d / "c.json")]) == 0
    rep = json.loads((d / "c.json").read_text())
    assert rep["coupled"]["dct_calls"] < rep["naive"]["dct_calls"]


def test_errors_exit_nonzero(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.evc"
    bad.write_bytes(b"nope")
    assert main(["decode", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "not an EVC stream" in capsys.readouterr().err
    assert main(["encode", "--frames", str(workdir / "sim" / "keyframes"), "--out", str(tmp_path / "x.evc"),
                 "--rc", "coupled"]) == 1


def test_module_entry_point(workdir):
    out = subprocess.run([sys.executable, "-m", "evcodec", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "simulate-events" in out.stdout
