from __future__ import annotations
from dataclasses import dataclass
from typing import Tuple


@dataclass(frozen=True, slots=True)
class CurrentAverage:
    value: float
    band: Tuple[float, float]
    geodesic_count: int
    spread: float
