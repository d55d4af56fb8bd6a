from __future__ import annotations
from dataclasses import dataclass
from typing import List, Tuple

from sprlab.domain.hyperbolic import HPoint, UnitTangent


@dataclass(frozen=True, slots=True)
class GeodesicPath:
    """Muestras (tiempo, punto, dirección) de una g_ε-geodésica de rapidez 1."""
    samples: List[Tuple[float, HPoint, float]]
    metric_id: str
    length: float

    def end(self) -> UnitTangent:
        _, p, ang = self.samples[-1]
        return UnitTangent(p, ang)

    def points(self) -> List[HPoint]:
        return [p for _, p, _ in self.samples]
