from __future__ import annotations
from dataclasses import dataclass
from typing import Tuple

from sprlab.domain.hyperbolic import HPoint

# Índices de generador con signo, base 1: 2 = b, -2 = b⁻¹
Word = Tuple[int, ...]


@dataclass(frozen=True, slots=True)
class OrbitPoint:
    word: Word
    image: HPoint
    dist: float

    @property
    def length(self) -> int:
        return len(self.word)
