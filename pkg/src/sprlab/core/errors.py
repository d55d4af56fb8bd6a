from __future__ import annotations
from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_SOLVER = 4


class SprLabError(RuntimeError):
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details: Dict[str, Any] = details

    def record(self) -> Dict[str, Any]:
        """Registro legible por máquina (error.json / stderr)."""
        return {
            "error": type(self).__name__,
            "message": str(self),
            "exit": self.exit_code,
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


def _plain(v: Any) -> Any:
    if isinstance(v, (int, float, str, bool)) or v is None:
        return v
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return str(v)


# -------------------- Validación (exit 2) -------------------- #
class ConfigError(SprLabError):
    pass


class GeometryError(SprLabError):
    pass


class PingPongViolation(SprLabError):
    pass


class CurvatureCertificateMissing(SprLabError):
    pass


class VersionMismatch(SprLabError):
    pass


class ChecksumMismatch(SprLabError):
    pass


# -------------------- Presupuesto (exit 3) -------------------- #
class BudgetExceeded(SprLabError):
    exit_code = EXIT_BUDGET


class InsufficientData(SprLabError):
    exit_code = EXIT_BUDGET


class NonTermination(SprLabError):
    exit_code = EXIT_BUDGET


class EmptyTail(SprLabError):
    exit_code = EXIT_BUDGET


# -------------------- Solvers (exit 4) -------------------- #
class StepFailure(SprLabError):
    exit_code = EXIT_SOLVER


class ShootingDivergence(SprLabError):
    exit_code = EXIT_SOLVER


def exit_code_for(exc: BaseException, default: Optional[int] = None) -> int:
    if isinstance(exc, SprLabError):
        return exc.exit_code
    return EXIT_SOLVER if default is None else default
