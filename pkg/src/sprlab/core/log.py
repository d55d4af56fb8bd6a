# src/sprlab/core/log.py
from __future__ import annotations
import sys

from loguru import logger

# Mapea algunos Unicode comunes a ASCII
_SAFE_MAP = str.maketrans({
    "→": "->",
    "←": "<-",
    "↔": "<->",
    "’": "'",
    "‘": "'",
    "“": '"',
    "”": '"',
    "—": "-",
    "–": "-",
    "δ": "delta",
    "ε": "eps",
    "Γ": "Gamma",
    "φ": "phi",
    "\u0302": "_hat",
    "\u0303": "~",
    "∞": "inf",
    "≤": "<=",
    "≥": ">=",
})

_FORMAT = ("<green>{time:HH:mm:ss.SSS}</green> <level>{level: <7}</level> "
           "<cyan>{extra[stage]}</cyan> {message}")

logger.configure(extra={"stage": "-"})


def configure_logging(level: str = "INFO", *, json: bool = False) -> None:
    """Un único sink en stderr; `json=True` emite registros serializados."""
    logger.remove()
    if json:
        logger.add(sys.stderr, level=level, serialize=True)
    else:
        logger.add(sys.stderr, level=level, format=_FORMAT)


def log(*parts, level: str = "INFO", stage: str | None = None) -> None:
    msg = " ".join(str(p) for p in parts).translate(_SAFE_MAP)
    try:
        bound = logger.bind(stage=stage) if stage else logger
        bound.opt(depth=1).log(level, msg)
    except Exception:
        # Último recurso: que no crashee jamás por loggear
        try:
            print(msg, file=sys.stderr)
        except Exception:
            pass


def debug(*parts, stage: str | None = None) -> None:
    log(*parts, level="DEBUG", stage=stage)


def warn(*parts, stage: str | None = None) -> None:
    log(*parts, level="WARNING", stage=stage)
