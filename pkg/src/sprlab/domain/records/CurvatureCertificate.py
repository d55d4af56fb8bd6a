from __future__ import annotations
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class CurvatureCertificate:
    max_laplacian: float
    eps: float
    safety: float
    pinching: float
    # Cota inferior de sqrt(-K) usada en el decaimiento de Busemann
    a_eps: float
    passed: bool
