from __future__ import annotations
from dataclasses import dataclass
from typing import List, Tuple

from sprlab.domain.hyperbolic import UnitTangent


@dataclass(frozen=True, slots=True)
class MorseImage:
    w: UnitTangent
    metric_id: str
    # s(t, v) muestreado: pares (t, s)
    cocycle: List[Tuple[float, float]]
    displacement: float
    bound: float
