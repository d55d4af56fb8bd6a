from __future__ import annotations

from loguru import logger

from sprlab.core.log import log


def _capture(*parts) -> str:
    seen = []
    sink = logger.add(seen.append, format="{message}", level="DEBUG")
    try:
        log(*parts, stage="test")
    finally:
        logger.remove(sink)
    assert len(seen) == 1
    return str(seen[0]).strip()


def test_estimator_symbols_become_ascii():
    assert _capture("δ̂ = 0.5") == "delta_hat = 0.5"
    assert _capture("δ_∞ ≤ δ_Γ") == "delta_inf <= delta_Gamma"
    assert _capture("Γ_W̃") == "Gamma_W~"
