from __future__ import annotations
from dataclasses import dataclass

from sprlab.domain.hyperbolic import UnitTangent


@dataclass(frozen=True, slots=True)
class StretchSample:
    v: UnitTangent
    value: float
    fd_step: float
    horizon: float
