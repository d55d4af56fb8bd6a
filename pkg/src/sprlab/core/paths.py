# src/sprlab/core/paths.py
from __future__ import annotations
from pathlib import Path

from platformdirs import user_cache_dir

APP_NAME = "sprlab"


def app_cache_dir() -> Path:
    base = Path(user_cache_dir(APP_NAME))
    base.mkdir(parents=True, exist_ok=True)
    return base


def orbits_dir() -> Path:
    d = app_cache_dir() / "orbits"
    d.mkdir(parents=True, exist_ok=True)
    return d


def ensure_out_dir(path: str | Path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d
