from __future__ import annotations
from dataclasses import dataclass, field, replace
from typing import Dict

from .OrbitPoint import Word


@dataclass(frozen=True, slots=True)
class ClosedGeodesic:
    rep: Word
    length0: float
    lengths: Dict[str, float] = field(default_factory=dict)

    def length(self, metric_id: str) -> float:
        if metric_id == "g0":
            return self.length0
        return self.lengths[metric_id]

    def with_length(self, metric_id: str, value: float) -> ClosedGeodesic:
        return replace(self, lengths={**self.lengths, metric_id: value})
