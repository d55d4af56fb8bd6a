# src/sprlab/domain/infinity.py
"""
Excursiones fuera de un compacto W = p(B(o, R_W)), entropía fuera de W,
entropía en el infinito y veredicto SPR.

Γ_W̃ se decide sobre el único segmento [o, γo], muestreado con paso
uniforme ≤ `step` y simétrico respecto del punto medio del tramo interior.
"""
from __future__ import annotations
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from sprlab.core.errors import ConfigError, EmptyTail, GeometryError, InsufficientData
from sprlab.core.log import log, warn
from sprlab.domain.group import (
    DEFAULT_MAX_STEPS, GroupPresentation, PattersonAtoms, estimate_exponent,
    estimate_from_shells, orbit_distance,
)
from sprlab.domain.hyperbolic import HPoint, geodesic_points, hyp_distance
from sprlab.domain.records import (
    ExcursionRecord, ExponentEstimate, OrbitPoint, SprReport, Verdict, Word,
)

DEFAULT_STEP = 0.1
TRIVIAL_MARGIN = 1.0
CHUNK = 200_000


@dataclass(frozen=True, slots=True)
class CompactWindow:
    R_W: float

    def __post_init__(self) -> None:
        if not self.R_W > 0.0:
            raise GeometryError("R_W debe ser positivo", R_W=self.R_W)

    @classmethod
    def for_group(cls, group: GroupPresentation, R_W: float) -> CompactWindow:
        half = 0.5 * group.max_displacement()
        if R_W <= half:
            raise GeometryError("R_W no supera el semidesplazamiento máximo",
                                R_W=R_W, half_displacement=half)
        return cls(R_W)


# ──────────────────────────────────────────────────────────────────────────────
# Registros de excursión
# ──────────────────────────────────────────────────────────────────────────────

def _interior_params(dist: float, R_W: float, step: float) -> Tuple[float, float, np.ndarray]:
    first_exit = min(R_W, dist)
    last_entry = max(dist - R_W, first_exit)
    span = last_entry - first_exit
    if span <= 0.0:
        return first_exit, last_entry, np.zeros(0)
    n = int(math.ceil(span / step))
    ts = np.linspace(first_exit, last_entry, n + 1)[1:-1]
    return first_exit, last_entry, ts


def _membership(group: GroupPresentation, z: np.ndarray, R_W: float,
                max_steps: int, threads: int) -> np.ndarray:
    if z.size == 0:
        return np.zeros(0, dtype=bool)
    chunks = [z[i:i + CHUNK] for i in range(0, z.size, CHUNK)]

    def member(c: np.ndarray) -> np.ndarray:
        return orbit_distance(group, c, max_steps=max_steps) <= R_W

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(member, chunks))
    else:
        parts = [member(c) for c in chunks]
    return np.concatenate(parts)


def excursion_records(group: GroupPresentation, points: Sequence[OrbitPoint],
                      window: CompactWindow, *, step: float = DEFAULT_STEP,
                      max_steps: int = DEFAULT_MAX_STEPS,
                      threads: int = 1) -> List[ExcursionRecord]:
    if not 0.0 < step <= 0.25:
        raise ConfigError("el paso de muestreo debe estar en (0, 0.25]", step=step)
    o = group.basepoint
    R_W = window.R_W
    meta: List[Tuple[float, float, np.ndarray]] = []
    samples: List[np.ndarray] = []
    for p in points:
        fe, le, ts = _interior_params(p.dist, R_W, step)
        meta.append((fe, le, ts))
        if ts.size:
            samples.append(geodesic_points(o, p.image, ts))
    z = np.concatenate(samples) if samples else np.zeros(0, dtype=complex)
    member = _membership(group, z, R_W, max_steps, threads)

    out: List[ExcursionRecord] = []
    pos = 0
    for p, (fe, le, ts) in zip(points, meta):
        m = member[pos:pos + ts.size]
        pos += ts.size
        hit = np.nonzero(m)[0]
        first_return = float(ts[hit[0]]) if hit.size else le
        out.append(ExcursionRecord(p.word, p.dist, not bool(hit.size), fe, le, first_return))
    return out


def is_outside_excursion(group: GroupPresentation, gamma: Word, window: CompactWindow,
                         step: float = DEFAULT_STEP, *,
                         max_steps: int = DEFAULT_MAX_STEPS) -> ExcursionRecord:
    image = group.apply_word(gamma, group.basepoint)
    point = OrbitPoint(gamma, image, hyp_distance(group.basepoint, image))
    return excursion_records(group, [point], window, step=step, max_steps=max_steps)[0]


# ──────────────────────────────────────────────────────────────────────────────
# Exponentes fuera de W y en el infinito
# ──────────────────────────────────────────────────────────────────────────────

def delta_out(group: GroupPresentation, orbit: Sequence[OrbitPoint], window: CompactWindow,
              R_window: Tuple[float, float], *, step: float = DEFAULT_STEP,
              min_excursions: int = 30, grid_step: float = 0.1,
              margin: float = TRIVIAL_MARGIN,
              records: Optional[Sequence[ExcursionRecord]] = None,
              threads: int = 1) -> ExponentEstimate:
    """
    Exponente de la subpoblación Γ_W̃. Sólo cuentan las palabras con
    d > 2R_W + margin: las más cortas están fuera de Γ·W̃ por no tener tramo
    interior. Si no quedan excursiones en la mitad superior de la ventana,
    Γ_W̃ es finito y se informa 0. La pendiente se toma sobre capas de ancho 1
    para que el corte inferior no sesgue el conteo.
    """
    lo, hi = R_window
    lo_eff = max(lo, 2.0 * window.R_W + margin)
    pts = [p for p in orbit if p.dist <= hi]
    if records is None:
        records = excursion_records(group, pts, window, step=step, threads=threads)
    out_d = np.array([r.dist for r in records if r.is_out and lo_eff < r.dist <= hi])
    if hi - lo_eff < 2.0:
        if out_d.size == 0:
            log(f"R_W = {window.R_W:g}: sin excursiones más allá de 2R_W", stage="infinity")
            return ExponentEstimate(0.0, (lo_eff, hi), 0.0, 0)
        raise InsufficientData("ventana demasiado corta por encima de 2R_W",
                               R_W=window.R_W, window=(lo_eff, hi))
    if out_d.size < min_excursions:
        upper = int(np.count_nonzero(out_d >= 0.5 * (lo_eff + hi)))
        if upper == 0:
            log(f"R_W = {window.R_W:g}: Γ_W̃ finito ({out_d.size} elementos)", stage="infinity")
            return ExponentEstimate(0.0, (lo_eff, hi), 0.0, int(out_d.size))
        raise InsufficientData("pocas excursiones en la ventana", count=int(out_d.size),
                               required=min_excursions, R_W=window.R_W)
    est = estimate_from_shells(out_d, (lo_eff, hi), grid_step=grid_step,
                               min_points=min_excursions)
    log(f"R_W = {window.R_W:g}: δ̂_out = {est.value:.4f} (N = {est.count})", stage="infinity")
    return est


def delta_infinity(group: GroupPresentation, orbit: Sequence[OrbitPoint],
                   ladder: Sequence[CompactWindow], R_window: Tuple[float, float],
                   **kw) -> Tuple[float, List[Tuple[float, ExponentEstimate]]]:
    radii = [w.R_W for w in ladder]
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigError("la escalera debe ser estrictamente creciente y de longitud ≥ 3",
                          ladder=radii)
    rungs = [(w.R_W, delta_out(group, orbit, w, R_window, **kw)) for w in ladder]
    for (r0, e0), (r1, e1) in zip(rungs, rungs[1:]):
        if e1.value > e0.value + 2.0 * (e0.stderr + e1.stderr) + 0.01:
            warn(f"escalera no monótona entre R_W = {r0:g} y {r1:g}", stage="infinity")
    return rungs[-1][1].value, rungs


def spr_verdict(group: GroupPresentation, orbit: Sequence[OrbitPoint],
                ladder: Sequence[CompactWindow], R_window: Tuple[float, float], *,
                floor: float = 0.05, grid_step: float = 0.1, min_points: int = 50,
                **kw) -> SprReport:
    delta_full = estimate_exponent(orbit, R_window, grid_step=grid_step,
                                   min_points=min_points)
    d_inf, rungs = delta_infinity(group, orbit, ladder, R_window,
                                  grid_step=grid_step, **kw)
    gap = delta_full.value - d_inf
    threshold = max(2.0 * (delta_full.stderr + rungs[-1][1].stderr), floor)
    verdict: Verdict
    if group.rank == 1 or delta_full.value <= floor:
        verdict = "NOT_SPR"
    elif gap > threshold:
        verdict = "SPR"
    else:
        verdict = "UNDECIDED"
    log(f"δ_Γ = {delta_full.value:.4f}, δ_∞ = {d_inf:.4f}, brecha = {gap:.4f} → {verdict}",
        stage="spr")
    return SprReport(delta_full, rungs, d_inf, gap, verdict, threshold)


# ──────────────────────────────────────────────────────────────────────────────
# Masa de Patterson de las excursiones largas
# ──────────────────────────────────────────────────────────────────────────────

def excursion_mass(group: GroupPresentation, atoms: PattersonAtoms, window: CompactWindow,
                   T: float, *, R_far: float,
                   records: Optional[Dict[Word, ExcursionRecord]] = None,
                   step: float = DEFAULT_STEP, threads: int = 1) -> float:
    """
    Masa relativa de la cola (d ≥ R_far) en U_T: átomos cuyo segmento desde o
    sólo toca Γ·W̃ dentro de W̃ durante [0, T]. Para T ≤ min(R_W, R_far) vale 1.
    """
    tail = np.nonzero(atoms.dist >= R_far)[0]
    if tail.size == 0:
        raise EmptyTail("no hay átomos más allá de R_far", R_far=R_far)
    if records is None:
        records = tail_records(group, atoms, window, R_far=R_far, step=step, threads=threads)
    w = atoms.weights[tail]
    keep = np.array([records[atoms.words[i]].first_return >= T for i in tail])
    return float(w[keep].sum() / w.sum())


def tail_records(group: GroupPresentation, atoms: PattersonAtoms, window: CompactWindow, *,
                 R_far: float, step: float = DEFAULT_STEP,
                 threads: int = 1) -> Dict[Word, ExcursionRecord]:
    tail = np.nonzero(atoms.dist >= R_far)[0]
    pts = [OrbitPoint(atoms.words[i], HPoint.from_complex(complex(atoms.points[i])),
                      float(atoms.dist[i])) for i in tail]
    recs = excursion_records(group, pts, window, step=step, threads=threads)
    return {r.word: r for r in recs}
