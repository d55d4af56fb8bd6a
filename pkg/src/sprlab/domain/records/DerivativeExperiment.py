from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Optional

from .ExponentEstimate import ExponentEstimate


@dataclass(frozen=True, slots=True)
class DerivativeRung:
    eps: float
    h: ExponentEstimate
    I_forward: float
    I_backward: float
    bm_avg_phi: float
    katok_upper: float
    katok_lower: float
    thurston: float
    h_orbit: Optional[float] = None
    # h_ε dentro de [katok_lower, katok_upper] salvo 2·residuo
    katok_ok: bool = True


@dataclass(frozen=True, slots=True)
class DerivativeExperiment:
    eps_ladder: List[float]
    h_estimates: List[ExponentEstimate]
    fd_slope: float
    predicted_slope: float
    relative_error: float
    h0: float
    bm_avg_phi: float
    stretch_slope: float
    rungs: List[DerivativeRung] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    spr_warning: bool = False
