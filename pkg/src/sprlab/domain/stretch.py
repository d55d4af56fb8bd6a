# src/sprlab/domain/stretch.py
"""
Estiramiento geodésico, correspondencia de Morse, promedios sobre
geodésicas cerradas y el experimento de derivada de la entropía.
"""
from __future__ import annotations
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from sprlab.core.errors import BudgetExceeded, ConfigError, InsufficientData, SprLabError
from sprlab.core.log import log, warn
from sprlab.domain.group import (
    GroupPresentation, closed_geodesics, enumerate_orbit, estimate_from_distances,
    geodesics_in_band, length_spectrum_exponent,
)
from sprlab.domain.hyperbolic import (
    HALF_PI, TWO_PI, UnitTangent, apply_mobius_array, apply_to_tangent, axis_frame,
    endpoints, flow, frame,
)
from sprlab.domain.metric import (
    BumpField, ConformalMetric, busemann_approx, closed_geodesic_length, flow_metric,
    geodesic_start, perturbed_distance,
)
from sprlab.domain.records import (
    ClosedGeodesic, CurrentAverage, DerivativeExperiment, DerivativeRung, ExponentEstimate,
    MorseImage, SprReport, StretchSample,
)

# Constante de hiperbolicidad del plano hiperbólico: log(1 + √2)
DELTA_H = math.log(1.0 + math.sqrt(2.0))
ORBIT_CHECK_CAP = 2000


# ──────────────────────────────────────────────────────────────────────────────
# Estiramiento
# ──────────────────────────────────────────────────────────────────────────────

def instantaneous_stretch(v: UnitTangent, g2: ConformalMetric, fd_step: float = 1e-3,
                          horizon: float = 8.0) -> StretchSample:
    """Diferencia central de t ↦ B^{g₂}_{ξ₊}(πv, π g₀^t v) en t = 0."""
    if not 1e-4 <= fd_step <= 1e-2:
        raise ConfigError("fd_step fuera de [1e-4, 1e-2]", fd_step=fd_step)
    xi = endpoints(v)[1]
    back = flow(v, -fd_step).base
    ahead = flow(v, fd_step).base
    b_back = busemann_approx(g2, xi, v.base, back, horizon).value
    b_ahead = busemann_approx(g2, xi, v.base, ahead, horizon).value
    value = (b_ahead - b_back) / (2.0 * fd_step)
    return StretchSample(v, value, fd_step, horizon)


def asymptotic_stretch(v: UnitTangent, g2: ConformalMetric, T: float) -> float:
    if T < 10.0:
        raise ConfigError("el estiramiento asintótico requiere T ≥ 10", T=T)
    return perturbed_distance(g2, v.base, flow(v, T).base) / T


def integrated_stretch(v: UnitTangent, g2: ConformalMetric, T: float, n: int = 21, *,
                       fd_step: float = 1e-3, horizon: float = 8.0) -> float:
    """∫₀^T E(g₀^t v) dt por trapecios con `n` nodos."""
    ts = np.linspace(0.0, T, n)
    vals = [instantaneous_stretch(flow(v, float(t)), g2, fd_step, horizon).value for t in ts]
    return float(np.sum(0.5 * (np.array(vals[1:]) + np.array(vals[:-1])) * np.diff(ts)))


def morse_constant(pinching: float, *, iterations: int = 200) -> float:
    """
    Cota C₃ del desplazamiento de Morse para g₂ con e^{-E}g₀ ≤ g₂ ≤ e^{E}g₀:
    punto fijo de D = δ_H·log₂(K(6D+2)) + 1 con K = e^E, escalado por e^{E/2}.
    """
    K = math.exp(pinching)
    D = 1.0
    for _ in range(iterations):
        nxt = DELTA_H * math.log2(K * (6.0 * D + 2.0)) + 1.0
        if abs(nxt - D) < 1e-12:
            break
        D = nxt
    return D * math.exp(0.5 * pinching)


# ──────────────────────────────────────────────────────────────────────────────
# Correspondencia de Morse
# ──────────────────────────────────────────────────────────────────────────────

def _far_points(v: UnitTangent, source: Optional[ConformalMetric], T: float):
    if source is None or source.is_flat:
        return flow(v, -T).base, flow(v, T).base
    return flow_metric(source, v, -T).base, flow_metric(source, v, T).base


def morse_psi(v: UnitTangent, g2: ConformalMetric, *, T: float = 8.0,
              source: Optional[ConformalMetric] = None,
              cocycle_times: Sequence[float] = (0.0, 0.5, 1.0, 1.5, 2.0),
              tol: float = 1e-7) -> MorseImage:
    """
    Ψ^{source→g₂}(v): punto de la g₂-geodésica entre π g^{-T} v y π g^{T} v
    normalizado por B^{g₂}_{ξ₊}(πv, πw) = 0 (aproximado en el punto lejano).
    """
    b_minus, b_plus = _far_points(v, source, T)
    start, L = geodesic_start(g2, b_minus, b_plus, tol=tol)
    d_v = perturbed_distance(g2, v.base, b_plus, tol=tol)
    w = flow_metric(g2, start, L - d_v)
    cocycle: List[Tuple[float, float]] = []
    for t in cocycle_times:
        if t == 0.0:
            cocycle.append((0.0, 0.0))
            continue
        moved = (flow(v, t) if source is None or source.is_flat
                 else flow_metric(source, v, t))
        cocycle.append((float(t), d_v - perturbed_distance(g2, moved.base, b_plus, tol=tol)))
    displacement = perturbed_distance(g2, v.base, w.base, tol=tol)
    return MorseImage(w, g2.metric_id, cocycle, displacement, morse_constant(g2.pinching))


def orbit_offset(v: UnitTangent, u: UnitTangent) -> float:
    """
    Distancia de u a la órbita g₀ de v: máximo entre la distancia de πu
    a la geodésica de v y el desvío angular respecto del flujo.
    """
    A = frame(v)
    uu = apply_to_tangent(A.inverse(), u)
    w = uu.base
    dist = math.asinh(abs(w.x) / w.y)
    diff = abs(uu.angle - HALF_PI) % TWO_PI
    return max(dist, min(diff, TWO_PI - diff))


# ──────────────────────────────────────────────────────────────────────────────
# Promedios sobre geodésicas cerradas
# ──────────────────────────────────────────────────────────────────────────────

def perturbed_lengths(geodesics: Sequence[ClosedGeodesic], metric: ConformalMetric,
                      group: GroupPresentation, *, spacing: float = 0.1,
                      threads: int = 1) -> List[ClosedGeodesic]:
    """Adjunta ℓ^{g_ε} a cada geodésica (orden preservado)."""
    if metric.is_flat:
        return [g.with_length(metric.metric_id, g.length0) for g in geodesics]

    def one(g: ClosedGeodesic) -> ClosedGeodesic:
        return g.with_length(metric.metric_id,
                             closed_geodesic_length(metric, group, g.rep, spacing=spacing))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, geodesics))
    else:
        out = [one(g) for g in geodesics]
    log(f"{len(out)} longitudes para {metric.metric_id}", stage="lengths")
    return out


def current_average_I(geodesics: Sequence[ClosedGeodesic], g1_id: str, g2_id: str,
                      band: Tuple[float, float], *, min_classes: int = 30) -> CurrentAverage:
    """Media uniforme de ℓ₂/ℓ₁ sobre las clases con ℓ₁ en la banda."""
    sel = geodesics_in_band(geodesics, band, g1_id)
    if len(sel) < min_classes:
        raise InsufficientData("pocas clases en la banda", count=len(sel),
                               required=min_classes, band=band)
    ratios = np.array([g.length(g2_id) / g.length(g1_id) for g in sel])
    return CurrentAverage(float(ratios.mean()), band, len(sel), float(ratios.std()))


def _axis_mean(f: Callable[[np.ndarray], np.ndarray], group: GroupPresentation,
               g: ClosedGeodesic, step: float) -> float:
    m = group.word_matrix(g.rep)
    n = max(8, int(math.ceil(g.length0 / step)))
    s = np.linspace(0.0, g.length0, n + 1)
    z = apply_mobius_array(axis_frame(m), 1j * np.exp(s))
    vals = np.asarray(f(z), dtype=float) * np.ones_like(s)
    return float(np.sum(0.5 * (vals[1:] + vals[:-1])) * (s[1] - s[0]) / g.length0)


def bm_average(f, group: GroupPresentation, geodesics: Sequence[ClosedGeodesic],
               band: Tuple[float, float], *, min_classes: int = 30,
               step: float = 0.01) -> float:
    """
    Media sobre clases de (1/ℓ₀)∮ f ds. `f` es un BumpField o cualquier
    función vectorizada z ↦ f(z).
    """
    sel = geodesics_in_band(geodesics, band)
    if len(sel) < min_classes:
        raise InsufficientData("pocas clases en la banda", count=len(sel),
                               required=min_classes, band=band)
    if isinstance(f, BumpField):
        if f.is_zero:
            return 0.0
        fn = f.value
    else:
        fn = f
    return float(np.mean([_axis_mean(fn, group, g, step) for g in sel]))


def thurston_ratio(geodesics: Sequence[ClosedGeodesic], g1_id: str, g2_id: str) -> float:
    if not geodesics:
        raise InsufficientData("sin geodésicas para el cociente de Thurston")
    r = np.array([g.length(g2_id) / g.length(g1_id) for g in geodesics])
    return float(np.max(np.maximum(r, 1.0 / r)))


# ──────────────────────────────────────────────────────────────────────────────
# Experimento de derivada
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, slots=True)
class DerivativeSettings:
    L: float = 12.0
    width: float = 1.0
    spectrum_window: float = 4.0
    smooth: float = 0.25
    min_classes: int = 30
    spacing: float = 0.1
    orbit_check: bool = False
    orbit_window: Tuple[float, float] = (4.0, 9.0)
    certificate_step: float = 0.02
    certificate_safety: float = 2.0
    threads: int = 1


def _slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(np.polyfit(np.asarray(xs), np.asarray(ys), 1)[0])


def _orbit_exponent(group: GroupPresentation, metric: ConformalMetric,
                    window: Tuple[float, float], *, cap: int = ORBIT_CHECK_CAP) -> float:
    """
    h por conteo orbital con d_ε. Se cuenta toda la órbita: sólo se dispara
    hacia los puntos cuya d_ε puede caer en la ventana (d₀ ∈ [e^{-E} lo, e^{E} hi]);
    los más cercanos quedan por debajo de lo. Más de `cap` disparos es un error.
    """
    lo, hi = window
    k = math.exp(metric.pinching)
    orbit = enumerate_orbit(group, hi * k)
    o = group.basepoint
    near = [p for p in orbit if p.dist < lo / k]
    shots = [p for p in orbit if p.dist >= lo / k]
    if len(shots) > cap:
        raise BudgetExceeded("demasiados disparos para el conteo orbital",
                             shots=len(shots), cap=cap, window=window)
    dists = [0.0] * len(near) + [perturbed_distance(metric, o, p.image) for p in shots]
    return estimate_from_distances(np.array(dists), window, min_points=30,
                                   secondary=False).value


def katok_holds(h: ExponentEstimate, lower: float, upper: float) -> bool:
    """h₀/I(g₀, g_ε) ≤ h_ε ≤ I(g_ε, g₀)·h₀ con holgura 2·residuo de h_ε."""
    slack = 2.0 * h.residual
    return lower - slack <= h.value <= upper + slack


def derivative_experiment(group: GroupPresentation, phi: BumpField,
                          eps_ladder: Sequence[float],
                          settings: DerivativeSettings = DerivativeSettings(), *,
                          spr: Optional[SprReport] = None,
                          geodesics: Optional[Sequence[ClosedGeodesic]] = None,
                          ) -> DerivativeExperiment:
    ladder = sorted(float(e) for e in eps_ladder)
    if any(abs(a + b) > 1e-12 for a, b in zip(ladder, reversed(ladder))):
        raise ConfigError("la escalera de ε debe ser simétrica", ladder=ladder)
    if any(abs(e) > 0.05 for e in ladder):
        raise ConfigError("|ε| ≤ 0.05 en la escalera", ladder=ladder)
    spr_warning = spr is not None and not spr.is_spr
    if spr_warning:
        warn("el grupo no pasó el veredicto SPR; la derivada puede no existir",
             stage="derivative")

    s = settings
    hi = s.L
    window = (max(2.0, hi - s.spectrum_window), hi)
    band = (s.L - s.width, s.L)
    metrics: Dict[float, ConformalMetric] = {
        e: ConformalMetric(phi, e, step=s.certificate_step, safety=s.certificate_safety)
        for e in ladder}
    E_max = max((m.pinching for m in metrics.values()), default=0.0)
    if geodesics is None:
        geodesics = closed_geodesics(group, hi * math.exp(E_max), threads=s.threads)
    h0 = length_spectrum_exponent(geodesics, window, smooth=s.smooth,
                                  min_classes=s.min_classes)
    bm_phi = bm_average(phi, group, geodesics, band, min_classes=s.min_classes)

    rungs: List[DerivativeRung] = []
    failures: List[str] = []
    for e in ladder:
        try:
            m = metrics[e]
            gs = perturbed_lengths(geodesics, m, group, spacing=s.spacing, threads=s.threads)
            mid = m.metric_id
            h = length_spectrum_exponent(gs, window, metric_id=mid, smooth=s.smooth,
                                         min_classes=s.min_classes)
            fwd = current_average_I(gs, "g0", mid, band, min_classes=s.min_classes)
            bwd = current_average_I(gs, mid, "g0", band, min_classes=s.min_classes)
            in_band = geodesics_in_band(gs, band)
            h_orbit = _orbit_exponent(group, m, s.orbit_window) if s.orbit_check else None
            upper, lower = bwd.value * h0.value, h0.value / fwd.value
            ok = katok_holds(h, lower, upper)
            if not ok:
                warn(f"ε = {e:+.3f}: h = {h.value:.4f} fuera de [{lower:.4f}, {upper:.4f}]",
                     stage="derivative")
            rungs.append(DerivativeRung(
                eps=e, h=h, I_forward=fwd.value, I_backward=bwd.value, bm_avg_phi=bm_phi,
                katok_upper=upper, katok_lower=lower,
                thurston=thurston_ratio(in_band, "g0", mid), h_orbit=h_orbit, katok_ok=ok))
            log(f"ε = {e:+.3f}: h = {h.value:.4f}, I = {fwd.value:.5f}", stage="derivative")
        except SprLabError as err:
            failures.append(f"eps={e:+.4f}: {type(err).__name__}: {err}")
            warn(f"peldaño ε = {e:+.4f} falló: {err}", stage="derivative")

    if len(rungs) < 2:
        raise InsufficientData("menos de dos peldaños válidos", failures=failures)
    xs = [0.0] + [r.eps for r in rungs]
    fd_slope = _slope(xs, [h0.value] + [r.h.value for r in rungs])
    stretch_slope = _slope(xs, [1.0] + [r.I_forward for r in rungs])
    predicted = -h0.value * bm_phi
    if abs(predicted) < 1e-12:
        rel = abs(fd_slope - predicted)
    else:
        rel = abs(fd_slope - predicted) / abs(predicted)
    log(f"pendiente fd = {fd_slope:.5f}, predicha = {predicted:.5f}, error rel = {rel:.3f}",
        stage="derivative")
    return DerivativeExperiment(
        eps_ladder=[r.eps for r in rungs], h_estimates=[r.h for r in rungs],
        fd_slope=fd_slope, predicted_slope=predicted, relative_error=rel, h0=h0.value,
        bm_avg_phi=bm_phi, stretch_slope=stretch_slope, rungs=rungs, failures=failures,
        spr_warning=spr_warning)
