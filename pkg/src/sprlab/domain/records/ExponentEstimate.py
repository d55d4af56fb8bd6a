from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Tuple


@dataclass(frozen=True, slots=True)
class ExponentEstimate:
    value: float
    window: Tuple[float, float]
    residual: float
    count: int
    # Valor por bisección de la serie de Poincaré (None si no se calculó)
    secondary: Optional[float] = None
    # max ln N(R)/R en la mitad superior de la ventana (proxy del limsup)
    ratio_max: Optional[float] = None
    # Error estándar de la pendiente
    stderr: float = 0.0

    def agreement(self) -> Optional[float]:
        if self.secondary is None:
            return None
        return abs(self.value - self.secondary)
