from __future__ import annotations
from dataclasses import dataclass

from .OrbitPoint import Word


@dataclass(frozen=True, slots=True)
class ExcursionRecord:
    word: Word
    dist: float
    is_out: bool
    first_exit: float
    last_entry: float
    # Primer parámetro fuera de W̃ donde [o, γo] toca Γ·W̃ (dist si nunca)
    first_return: float
