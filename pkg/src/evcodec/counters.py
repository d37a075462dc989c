"""Global operation counters used as a compute proxy.

Counters are monotone within a run and reset by each CLI command.
"""
from dataclasses import asdict, dataclass


@dataclass
class OpCounters:
    sad_evals: int = 0
    dct_calls: int = 0
    idct_calls: int = 0
    quant_calls: int = 0
    dequant_calls: int = 0
    inter_pred_blocks: int = 0
    mc_block_warps: int = 0
    mc_candidate_warps: int = 0

    def reset(self):
        for name in self.__dataclass_fields__:
            setattr(self, name, 0)

    def snapshot(self) -> dict:
        return asdict(self)

    def since(self, before: dict) -> dict:
        now = self.snapshot()
        return {k: now[k] - before[k] for k in now}


counters = OpCounters()
