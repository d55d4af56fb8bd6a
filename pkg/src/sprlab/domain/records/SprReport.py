from __future__ import annotations
from dataclasses import dataclass
from typing import List, Literal, Tuple

from .ExponentEstimate import ExponentEstimate

Verdict = Literal["SPR", "NOT_SPR", "UNDECIDED"]


@dataclass(frozen=True, slots=True)
class SprReport:
    delta_full: ExponentEstimate
    delta_out_ladder: List[Tuple[float, ExponentEstimate]]
    delta_infinity: float
    gap: float
    verdict: Verdict
    threshold: float = 0.0

    @property
    def is_spr(self) -> bool:
        return self.verdict == "SPR"
