# src/sprlab/core/config.py
from __future__ import annotations
import hashlib
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from sprlab.core.errors import ConfigError

# Cota de ε para la que se exige certificado de curvatura en la escalera
EPS_LIMIT = 0.05


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# -------------------- Grupo -------------------- #
class GeneratorSpec(_Section):
    label: str
    matrix: Tuple[float, float, float, float]
    # Disco euclídeo (centro real, radio) del dominio de ping-pong del generador;
    # el inverso usa `inverse_disk`. Sin discos se usan paredes de Dirichlet.
    disk: Optional[Tuple[float, float]] = None
    inverse_disk: Optional[Tuple[float, float]] = None


class GroupSection(_Section):
    catalog: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    generators: List[GeneratorSpec] = Field(default_factory=list)
    basepoint: Tuple[float, float] = (0.0, 1.0)

    @model_validator(mode="after")
    def _one_source(self) -> GroupSection:
        sources = sum([self.catalog is not None, bool(self.generators)])
        if sources != 1:
            raise ValueError("declara exactamente uno de: catalog, generators")
        if self.basepoint[1] <= 0.0:
            raise ValueError("el punto base debe estar en el semiplano (y > 0)")
        return self


# -------------------- Presupuestos y estimadores -------------------- #
class EnumerationSection(_Section):
    R_max: float = Field(14.0, gt=0.0)
    word_cap: int = Field(2_000_000, gt=0)
    slack: Optional[float] = Field(None, ge=0.0)


class ExponentSection(_Section):
    window: Tuple[float, float] = (6.0, 14.0)
    grid_step: float = Field(0.1, gt=0.0)
    margin: float = Field(0.05, gt=0.0)
    min_points: int = Field(50, gt=0)

    @model_validator(mode="after")
    def _window(self) -> ExponentSection:
        lo, hi = self.window
        if lo < 2.0 or hi <= lo:
            raise ValueError("ventana inválida: se requiere 2 ≤ R_min < R_max")
        return self


class InfinitySection(_Section):
    ladder: List[float] = Field(default_factory=lambda: [3.0, 4.0, 5.0])
    step: float = Field(0.1, gt=0.0, le=0.25)
    min_excursions: int = Field(30, gt=0)
    verdict_floor: float = Field(0.05, ge=0.0)
    mass_T: List[float] = Field(default_factory=lambda: [0.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
    shadow_radius: float = Field(2.0, gt=0.0)
    shadow_samples: int = Field(50, gt=0)
    shadow_min_dist: float = Field(8.0, gt=0.0)

    @model_validator(mode="after")
    def _ladder(self) -> InfinitySection:
        lad = self.ladder
        if len(lad) < 3 or any(b <= a for a, b in zip(lad, lad[1:])) or lad[0] <= 0.0:
            raise ValueError("la escalera R_W debe ser positiva, creciente y de longitud ≥ 3")
        return self


class BumpSpec(_Section):
    cx: float
    cy: float = Field(gt=0.0)
    radius: float = Field(gt=0.0)
    amplitude: float


class PerturbationSection(_Section):
    bumps: List[BumpSpec] = Field(default_factory=list)
    periodize: bool = False
    cover_radius: float = Field(4.0, gt=0.0)
    eps_ladder: List[float] = Field(default_factory=lambda: [-0.04, -0.02, 0.02, 0.04])
    orbit_check: bool = False

    @model_validator(mode="after")
    def _ladder(self) -> PerturbationSection:
        eps = sorted(self.eps_ladder)
        if any(abs(e) > EPS_LIMIT for e in eps):
            raise ValueError(f"|ε| debe ser ≤ {EPS_LIMIT}")
        if any(abs(a + b) > 1e-12 for a, b in zip(eps, reversed(eps))):
            raise ValueError("la escalera de ε debe ser simétrica respecto de 0")
        return self


class BandsSection(_Section):
    L: float = Field(12.0, gt=0.0)
    width: float = Field(1.0, gt=0.0)
    L_max: Optional[float] = Field(None, gt=0.0)
    invert_dedup: bool = False
    min_classes: int = Field(30, gt=0)
    spectrum_window: float = Field(4.0, gt=0.0)
    smooth: float = Field(0.25, ge=0.0)


class StretchSection(_Section):
    fd_step: float = Field(1e-3, ge=1e-4, le=1e-2)
    horizon: float = Field(8.0, gt=0.0)
    T: float = Field(12.0, ge=10.0)
    samples: int = Field(20, gt=0)


class TolerancesSection(_Section):
    distance: float = Field(1e-6, gt=0.0)
    ode_rtol: float = Field(1e-10, gt=0.0)
    ode_atol: float = Field(1e-12, gt=0.0)
    ball_step: float = Field(0.05, gt=0.0)
    collision: float = Field(1e-8, gt=0.0)
    certificate_step: float = Field(0.02, gt=0.0)
    certificate_safety: float = Field(2.0, ge=1.0)
    max_reduction_steps: int = Field(10_000, gt=0)
    relax_spacing: float = Field(0.1, gt=0.0)


RUN_LOCAL_FIELDS = ("out", "cache", "threads", "log_level", "log_json")


class RunSection(_Section):
    threads: int = Field(1, gt=0)
    seed: int = 0
    out: str = "out"
    cache: Optional[str] = None
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    log_json: bool = False


class ExperimentConfig(_Section):
    name: str = "experiment"
    group: GroupSection
    enumeration: EnumerationSection = EnumerationSection()
    exponent: ExponentSection = ExponentSection()
    infinity: InfinitySection = InfinitySection()
    perturbation: PerturbationSection = PerturbationSection()
    bands: BandsSection = BandsSection()
    stretch: StretchSection = StretchSection()
    tolerances: TolerancesSection = TolerancesSection()
    run: RunSection = RunSection()

    @model_validator(mode="after")
    def _windows_fit(self) -> ExperimentConfig:
        if self.exponent.window[1] > self.enumeration.R_max + 1e-12:
            raise ValueError("la ventana del exponente excede R_max de la enumeración")
        return self

    def canonical_json(self) -> str:
        """Configuración sin los campos de ubicación y recursos de la corrida."""
        data = self.model_dump(mode="json", exclude={"run": set(RUN_LOCAL_FIELDS)})
        return json.dumps(data, sort_keys=True,
                          separators=(",", ":"), ensure_ascii=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


# -------------------- Carga -------------------- #
def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def build_config(data: Dict[str, Any],
                 overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    merged = _merge(data, overrides or {})
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as e:
        problems = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}"
                    for err in e.errors()]
        raise ConfigError("configuración inválida", problems=problems) from e


def load_config(path: str | Path,
                overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    p = Path(path)
    try:
        with p.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError("no existe el archivo de configuración", path=str(p)) from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("TOML ilegible", path=str(p), reason=str(e)) from e
    data.setdefault("name", p.stem)
    return build_config(data, overrides)


def cli_overrides(*, threads: Optional[int] = None, budget: Optional[int] = None,
                  out: Optional[str] = None, cache: Optional[str] = None,
                  seed: Optional[int] = None) -> Dict[str, Any]:
    """Traduce los flags de la línea de comandos a un dict de overrides."""
    run: Dict[str, Any] = {}
    if threads is not None:
        run["threads"] = threads
    if out is not None:
        run["out"] = out
    if cache is not None:
        run["cache"] = cache
    if seed is not None:
        run["seed"] = seed
    ov: Dict[str, Any] = {"run": run} if run else {}
    if budget is not None:
        ov["enumeration"] = {"word_cap": budget}
    return ov
