# src/sprlab/domain/metric.py
"""
Métricas conformes g_ε = e^{2εφ} g₀ con φ suma de bultos radiales.

- BumpField: φ, su gradiente euclídeo y (opcional) periodización por Γ.
- ConformalMetric: certificado de curvatura, pinzamiento E, a_ε.
- Geodésicas por EDO (scipy DOP853), distancias por disparo y por
  relajación de poligonales en coordenadas de Fermi.
"""
from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.optimize import brentq, minimize, minimize_scalar, newton

from sprlab.core.errors import (
    ConfigError, CurvatureCertificateMissing, GeometryError, ShootingDivergence,
    StepFailure,
)
from sprlab.core.log import debug, warn
from sprlab.domain.group import GroupPresentation, enumerate_orbit, reduce_points
from sprlab.domain.hyperbolic import (
    BoundaryPoint, HPoint, MobiusMap, UnitTangent, apply_mobius_array,
    axis_frame, direction_to, flow, frame, hyp_distance, hyp_distance_arrays,
    visual_angle,
)
from sprlab.domain.records import CurvatureCertificate, GeodesicPath, Word

RTOL = 1e-10
ATOL = 1e-12
MAX_HORIZON = 100.0
CERT_STEP = 0.02
CERT_SAFETY = 2.0


# ──────────────────────────────────────────────────────────────────────────────
# Perfil y campo de bultos
# ──────────────────────────────────────────────────────────────────────────────

def profile(s: np.ndarray) -> np.ndarray:
    """ψ(s) = (1-s)³(1+3s+6s²) en [0,1), 0 fuera; C² en s = 1."""
    s = np.asarray(s, dtype=float)
    inside = s < 1.0
    t = np.where(inside, s, 1.0)
    return np.where(inside, (1.0 - t) ** 3 * (1.0 + 3.0 * t + 6.0 * t * t), 0.0)


def profile_prime(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.where(s < 1.0, -30.0 * s * s * (1.0 - s) ** 2, 0.0)


@dataclass(frozen=True, slots=True)
class Bump:
    center: HPoint
    radius: float
    amplitude: float

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise GeometryError("radio de bulto no positivo", radius=self.radius)

    def radial_laplacian_max(self, step: float = CERT_STEP) -> float:
        """
        max |Δ(Aψ(ρ/R))| por diferencias finitas en la coordenada polar
        geodésica: Δf = f'' + coth(ρ) f'.
        """
        R, A = self.radius, self.amplitude
        rho = np.arange(step, R + step, step)
        f = A * profile(rho / R)
        fp = A * profile(np.concatenate([[0.0], rho, [R + step]]) / R)
        d1 = (fp[2:] - fp[:-2]) / (2.0 * step)
        d2 = (fp[2:] - 2.0 * f + fp[:-2]) / (step * step)
        lap = d2 + d1 / np.tanh(rho)
        return float(np.max(np.abs(lap)))


class BumpField:
    """
    φ = Σ A ψ(d(·, c)/R). Con `periodize` se suma sobre las traslaciones
    γc que alcanzan el punto tras reducirlo al dominio de Dirichlet; es
    exacta para puntos cuya reducción queda a distancia ≤ cover_radius de o.
    """

    def __init__(self, bumps: Sequence[Bump], *, group: Optional[GroupPresentation] = None,
                 periodize: bool = False, cover_radius: float = 4.0) -> None:
        if periodize and group is None:
            raise ConfigError("periodizar requiere un grupo")
        self.bumps: Tuple[Bump, ...] = tuple(bumps)
        self.group = group if periodize else None
        self.periodize = periodize
        self.cover_radius = cover_radius
        self._overlap: List[int] = [1] * len(self.bumps)
        centers, radii, amps = [], [], []
        for k, b in enumerate(self.bumps):
            if self.group is None:
                centers.append(b.center.z)
                radii.append(b.radius)
                amps.append(b.amplitude)
                continue
            o = self.group.basepoint
            reach = cover_radius + b.radius
            orbit = enumerate_orbit(self.group, reach + hyp_distance(o, b.center))
            cs = np.array([self.group.word_matrix(p.word).apply_complex(b.center.z)
                           for p in orbit])
            near = hyp_distance_arrays(o.z, cs) <= reach
            cs = cs[near]
            self._overlap[k] = int(np.count_nonzero(
                hyp_distance_arrays(b.center.z, cs) < 2.0 * b.radius))
            centers += list(cs)
            radii += [b.radius] * cs.size
            amps += [b.amplitude] * cs.size
        self._c = np.array(centers, dtype=complex)
        self._r = np.array(radii, dtype=float)
        self._a = np.array(amps, dtype=float)

    @classmethod
    def zero(cls) -> BumpField:
        return cls([])

    @property
    def is_zero(self) -> bool:
        return not self.bumps or all(b.amplitude == 0.0 for b in self.bumps)

    def sup_bound(self) -> float:
        """Cota de sup|φ|: Σ|A| por la multiplicidad de solapamiento de traslaciones."""
        return float(sum(abs(b.amplitude) * k for b, k in zip(self.bumps, self._overlap)))

    def laplacian_bound(self, step: float = CERT_STEP) -> float:
        return float(sum(b.radial_laplacian_max(step) * k
                         for b, k in zip(self.bumps, self._overlap)))

    # -------------------- evaluación -------------------- #
    def _centers_for(self, z: np.ndarray) -> np.ndarray:
        if self.group is None:
            return self._c[None, :]
        _, M = reduce_points(self.group, z)
        c = self._c[None, :]
        a, b, cc, d = (M[:, i][:, None] for i in range(4))
        return (a * c + b) / (cc * c + d)

    def value_grad(self, z) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(φ, ∂φ/∂x, ∂φ/∂y) en los puntos `z` (array complejo)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        n = z.shape[0]
        if self._c.size == 0:
            zero = np.zeros(n)
            return zero, zero.copy(), zero.copy()
        C = self._centers_for(z)
        zc = z[:, None]
        x, y = zc.real, zc.imag
        dx, dy = x - C.real, y - C.imag
        sq = dx * dx + dy * dy
        u = 1.0 + sq / (2.0 * y * C.imag)
        d = np.arccosh(np.maximum(u, 1.0))
        s = d / self._r[None, :]
        val = (self._a[None, :] * profile(s)).sum(axis=1)
        sh = np.sinh(d)
        ok = (s < 1.0) & (d > 1e-12)
        coef = np.where(ok, self._a[None, :] * profile_prime(s) / self._r[None, :]
                        / np.where(ok, sh, 1.0), 0.0)
        du_dx = dx / (y * C.imag)
        du_dy = dy / (y * C.imag) - sq / (2.0 * y * y * C.imag)
        gx = (coef * du_dx).sum(axis=1)
        gy = (coef * du_dy).sum(axis=1)
        return val, gx, gy

    def value(self, z) -> np.ndarray:
        return self.value_grad(z)[0]

    def at(self, p: HPoint) -> float:
        return float(self.value(p.z)[0])


# ──────────────────────────────────────────────────────────────────────────────
# Métrica conforme
# ──────────────────────────────────────────────────────────────────────────────

def certify(phi: BumpField, eps: float, *, step: float = CERT_STEP,
            safety: float = CERT_SAFETY) -> CurvatureCertificate:
    """
    K = -e^{-2εφ}(1 + εΔφ); se exige safety·|ε|·max|Δφ| < 1.
    a_ε = sqrt(e^{-E}(1 - |ε| max|Δφ|)) acota sqrt(-K) por debajo.
    """
    lap = 0.0 if phi.is_zero or eps == 0.0 else phi.laplacian_bound(step)
    E = 2.0 * abs(eps) * phi.sup_bound()
    passed = safety * abs(eps) * lap < 1.0
    a_eps = math.sqrt(max(0.0, math.exp(-E) * (1.0 - abs(eps) * lap))) if passed else 0.0
    return CurvatureCertificate(lap, eps, safety, E, a_eps, passed)


class ConformalMetric:
    def __init__(self, phi: BumpField, eps: float, *, step: float = CERT_STEP,
                 safety: float = CERT_SAFETY, horizon: float = MAX_HORIZON,
                 rtol: float = RTOL, atol: float = ATOL) -> None:
        self.phi = phi
        self.eps = float(eps)
        self.horizon = horizon
        self.rtol = rtol
        self.atol = atol
        self.certificate = certify(phi, self.eps, step=step, safety=safety)
        if not self.certificate.passed:
            raise CurvatureCertificateMissing(
                "la perturbación no admite certificado de curvatura negativa",
                eps=self.eps, max_laplacian=self.certificate.max_laplacian, safety=safety)

    @classmethod
    def hyperbolic(cls) -> ConformalMetric:
        return cls(BumpField.zero(), 0.0)

    @property
    def is_flat(self) -> bool:
        """True si g_ε = g₀."""
        return self.eps == 0.0 or self.phi.is_zero

    @property
    def pinching(self) -> float:
        return self.certificate.pinching

    @property
    def a_eps(self) -> float:
        return self.certificate.a_eps

    @property
    def metric_id(self) -> str:
        return "g0" if self.is_flat else f"eps{self.eps:+.4f}"

    def factor(self, z) -> np.ndarray:
        """e^{εφ}: razón entre normas g_ε y g₀."""
        if self.is_flat:
            return np.ones(np.shape(np.atleast_1d(z)))
        return np.exp(self.eps * self.phi.value(z))


def metric_norm(metric: ConformalMetric, v: UnitTangent) -> float:
    """‖v‖^{g_ε} para v de norma g₀ unitaria."""
    return float(metric.factor(v.base.z)[0])


def metric_norm_derivative(metric: ConformalMetric, v: UnitTangent) -> float:
    """d/dε ‖v‖^{g_ε} en ε = 0, igual a φ(πv)."""
    return metric.phi.at(v.base)


# ──────────────────────────────────────────────────────────────────────────────
# EDO geodésica
# ──────────────────────────────────────────────────────────────────────────────

def _rhs(metric: ConformalMetric) -> Callable[[float, np.ndarray], np.ndarray]:
    eps = metric.eps
    flat = metric.is_flat

    def f(_t: float, s: np.ndarray) -> np.ndarray:
        x, eta, th = s
        y = math.exp(eta)
        if flat:
            u = gx = gy = 0.0
        else:
            val, ax, ay = metric.phi.value_grad(complex(x, y))
            u, gx, gy = eps * val[0], eps * ax[0], eps * ay[0]
        k = math.exp(-u)
        c, sn = math.cos(th), math.sin(th)
        return np.array([y * k * c, k * sn, k * (-y * gx * sn + (y * gy - 1.0) * c)])

    return f


def _solve(metric: ConformalMetric, v0: UnitTangent, T: float, *, dense: bool = True):
    if not metric.certificate.passed:
        raise CurvatureCertificateMissing("métrica sin certificado", eps=metric.eps)
    if abs(T) > metric.horizon:
        raise ConfigError("tiempo de integración fuera del horizonte",
                          T=T, horizon=metric.horizon)
    y0 = np.array([v0.base.x, math.log(v0.base.y), v0.angle])
    sol = solve_ivp(_rhs(metric), (0.0, T), y0, method="DOP853", rtol=metric.rtol,
                    atol=metric.atol, dense_output=dense)
    if sol.status < 0 or not np.all(np.isfinite(sol.y)):
        raise StepFailure("el integrador adaptativo falló", message=sol.message, T=T)
    return sol


def _state_to_tangent(s: np.ndarray) -> UnitTangent:
    return UnitTangent(HPoint(float(s[0]), math.exp(float(s[1]))), float(s[2]))


def integrate_geodesic(metric: ConformalMetric, v0: UnitTangent, T: float, *,
                       sample_step: float = 0.05) -> GeodesicPath:
    """g_ε-geodésica de rapidez 1 que parte de v0 (v0 de norma g₀ unitaria)."""
    if T == 0.0:
        return GeodesicPath([(0.0, v0.base, v0.angle)], metric.metric_id, 0.0)
    sol = _solve(metric, v0, T)
    n = max(2, int(math.ceil(abs(T) / sample_step)) + 1)
    ts = np.linspace(0.0, T, n)
    ys = sol.sol(ts)
    samples = [(float(t), HPoint(float(a), math.exp(float(b))), float(c))
               for t, a, b, c in zip(ts, ys[0], ys[1], ys[2])]
    return GeodesicPath(samples, metric.metric_id, abs(T))


def flow_metric(metric: ConformalMetric, v: UnitTangent, t: float) -> UnitTangent:
    """g_ε^t v (t con signo)."""
    if t == 0.0:
        return v
    if metric.is_flat:
        return flow(v, t)
    if t < 0.0:
        return flow_metric(metric, v.reversed(), -t).reversed()
    sol = _solve(metric, v, t, dense=False)
    return _state_to_tangent(sol.y[:, -1])


# ──────────────────────────────────────────────────────────────────────────────
# Distancias
# ──────────────────────────────────────────────────────────────────────────────

@dataclass
class _Shot:
    theta: float
    residual: float
    t_star: float
    sol: object = field(repr=False, default=None)


def _shoot(metric: ConformalMetric, x: HPoint, y: HPoint, theta: float,
           T_max: float) -> _Shot:
    sol = _solve(metric, UnitTangent(x, theta), T_max)
    n = max(64, int(T_max / 0.05))
    ts = np.linspace(0.0, T_max, n)
    st = sol.sol(ts)
    zs = st[0] + 1j * np.exp(st[1])
    dist = hyp_distance_arrays(zs, y.z)
    k = int(np.argmin(dist))
    lo, hi = ts[max(0, k - 1)], ts[min(n - 1, k + 1)]

    def gap(t: float) -> float:
        s = sol.sol(t)
        return float(hyp_distance_arrays(complex(s[0], math.exp(s[1])), y.z))

    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    t_star = float(res.x)
    s = sol.sol(t_star)
    px, py, th = float(s[0]), math.exp(float(s[1])), float(s[2])
    # Desplazamiento lateral con signo (positivo si y queda a la izquierda)
    cross = math.cos(th) * (y.y - py) - math.sin(th) * (y.x - px)
    return _Shot(theta, cross / math.sqrt(py * y.y), t_star, sol)


def _shooting_solve(metric: ConformalMetric, x: HPoint, y: HPoint,
                    tol: float) -> _Shot:
    d0 = hyp_distance(x, y)
    T_max = min(metric.horizon, math.exp(metric.pinching) * d0 + 1.0)
    theta0 = direction_to(x, y)
    cache: dict = {}

    def r(theta: float) -> float:
        shot = _shoot(metric, x, y, theta, T_max)
        cache[theta] = shot
        return shot.residual

    def best() -> _Shot:
        return min(cache.values(), key=lambda s: abs(s.residual))

    try:
        if abs(r(theta0)) <= tol:
            return cache[theta0]
        newton(r, theta0, x1=theta0 + 1e-4, tol=1e-14, maxiter=50)
        shot = best()
        if abs(shot.residual) <= tol:
            return shot
    except (RuntimeError, StepFailure, ValueError) as e:
        debug(f"secante sin convergencia: {e}", stage="shooting")

    for delta in (0.01, 0.03, 0.1, 0.3):
        a, b = theta0 - delta, theta0 + delta
        try:
            ra, rb = r(a), r(b)
        except StepFailure:
            continue
        if ra * rb < 0.0:
            try:
                brentq(r, a, b, xtol=1e-14, maxiter=200)
            except (RuntimeError, StepFailure, ValueError) as e:
                debug(f"bisección sin convergencia: {e}", stage="shooting")
                continue
            shot = best()
            if abs(shot.residual) <= tol:
                return shot
    shot = best() if cache else _Shot(theta0, float("inf"), float("nan"))
    raise ShootingDivergence("el disparo no alcanzó el punto objetivo",
                             d0=d0, residual=shot.residual, theta=shot.theta,
                             eps=metric.eps)


def perturbed_distance(metric: ConformalMetric, x: HPoint, y: HPoint, *,
                       tol: float = 1e-7) -> float:
    if metric.is_flat:
        return hyp_distance(x, y)
    if x == y:
        return 0.0
    return _shooting_solve(metric, x, y, tol).t_star


def geodesic_start(metric: ConformalMetric, x: HPoint, y: HPoint, *,
                   tol: float = 1e-7) -> Tuple[UnitTangent, float]:
    """(vector inicial en x, longitud) del segmento g_ε-geodésico [x, y]."""
    if x == y:
        raise GeometryError("segmento degenerado")
    if metric.is_flat:
        return UnitTangent(x, direction_to(x, y)), hyp_distance(x, y)
    shot = _shooting_solve(metric, x, y, tol)
    return UnitTangent(x, shot.theta), shot.t_star


# -------------------- Cadenas en coordenadas de Fermi -------------------- #
class _FermiChain:
    """
    Poligonal p_i = A(e^{s_i}(tanh r_i + i sech r_i)) sobre el eje A(iR₊).
    Abierta: r_0 = r_N = 0 fijos. Cerrada: r_N = r_0 (monodromía e^{s_N}).
    """

    def __init__(self, metric: ConformalMetric, A: MobiusMap, total: float,
                 spacing: float, closed: bool) -> None:
        self.metric = metric
        self.A = A
        self.closed = closed
        self.N = max(4, int(math.ceil(total / spacing)))
        self.s = np.linspace(0.0, total, self.N + 1)
        self.ds = total / self.N

    def _full(self, r: np.ndarray) -> np.ndarray:
        if self.closed:
            return np.concatenate([r, r[:1]])
        return np.concatenate([[0.0], r, [0.0]])

    def points(self, r: np.ndarray) -> np.ndarray:
        rr = self._full(r)
        w = np.exp(self.s) * (np.tanh(rr) + 1j / np.cosh(rr))
        return apply_mobius_array(self.A, w)

    def x0(self) -> np.ndarray:
        return np.zeros(self.N if self.closed else self.N - 1)

    def energy(self, r: np.ndarray) -> Tuple[float, np.ndarray]:
        rr = self._full(r)
        r1, r2 = rr[:-1], rr[1:]
        ch = math.cosh(self.ds)
        C = np.cosh(r1) * np.cosh(r2) * ch - np.sinh(r1) * np.sinh(r2)
        C = np.maximum(C, 1.0)
        D = np.arccosh(C)
        sD = np.sqrt(C * C - 1.0)
        sD = np.where(sD > 1e-300, sD, 1.0)
        dD1 = (np.sinh(r1) * np.cosh(r2) * ch - np.cosh(r1) * np.sinh(r2)) / sD
        dD2 = (np.cosh(r1) * np.sinh(r2) * ch - np.sinh(r1) * np.cosh(r2)) / sD

        m = self.metric
        if m.is_flat:
            F = np.ones_like(D)
            dphi = np.zeros_like(rr)
            phi = np.zeros_like(rr)
        else:
            w = np.exp(self.s) * (np.tanh(rr) + 1j / np.cosh(rr))
            z = apply_mobius_array(self.A, w)
            phi, gx, gy = m.phi.value_grad(z)
            dw = np.exp(self.s) * (1.0 / np.cosh(rr) ** 2
                                   - 1j * np.tanh(rr) / np.cosh(rr))
            dz = dw / (self.A.c * w + self.A.d) ** 2
            dphi = gx * dz.real + gy * dz.imag
            F = np.exp(0.5 * m.eps * (phi[:-1] + phi[1:]))
        L = float(np.sum(D * F))

        g_full = np.zeros_like(rr)
        g_full[:-1] += dD1 * F + 0.5 * m.eps * D * F * dphi[:-1]
        g_full[1:] += dD2 * F + 0.5 * m.eps * D * F * dphi[1:]
        if self.closed:
            g = g_full[:-1].copy()
            g[0] += g_full[-1]
        else:
            g = g_full[1:-1]
        return L, g


@dataclass(frozen=True, slots=True)
class RelaxationResult:
    length: float
    stalled: bool
    iterations: int
    monotone: bool
    offsets: Tuple[float, ...] = ()


def _relax(chain: _FermiChain, *, maxiter: int = 500) -> RelaxationResult:
    energies: List[float] = []

    def cb(xk: np.ndarray) -> None:
        energies.append(chain.energy(xk)[0])

    x0 = chain.x0()
    e0, _ = chain.energy(x0)
    res = minimize(chain.energy, x0, jac=True, method="L-BFGS-B", callback=cb,
                   options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-11})
    trail = [e0] + energies
    monotone = all(b <= a + 1e-12 for a, b in zip(trail, trail[1:]))
    value = float(min(res.fun, e0))
    stalled = not res.success and res.nit >= maxiter
    return RelaxationResult(value, stalled, int(res.nit), monotone, tuple(float(v) for v in res.x))


def relaxed_distance(metric: ConformalMetric, x: HPoint, y: HPoint, *,
                     spacing: float = 0.1) -> float:
    """Distancia por relajación de una poligonal inicializada en [x, y]_{g₀}."""
    d0 = hyp_distance(x, y)
    if d0 == 0.0:
        return 0.0
    if metric.is_flat:
        return d0
    A = frame(UnitTangent(x, direction_to(x, y)))
    out = _relax(_FermiChain(metric, A, d0, spacing, closed=False))
    if out.stalled:
        warn(f"relajación estancada (d₀ = {d0:.3f})", stage="relax")
    return out.length


def relax_closed_geodesic(metric: ConformalMetric, group: GroupPresentation, rep: Word, *,
                          spacing: float = 0.1) -> RelaxationResult:
    m = group.word_matrix(rep)
    ell0 = m.translation_length()
    if ell0 <= 0.0:
        raise GeometryError("la palabra no es hiperbólica", word=rep)
    if metric.is_flat:
        return RelaxationResult(ell0, False, 0, True)
    return _relax(_FermiChain(metric, axis_frame(m), ell0, spacing, closed=True))


def closed_geodesic_length(metric: ConformalMetric, group: GroupPresentation, rep: Word, *,
                           spacing: float = 0.1) -> float:
    out = relax_closed_geodesic(metric, group, rep, spacing=spacing)
    if out.stalled:
        warn(f"relajación cerrada estancada para {rep}", stage="relax")
    if not out.monotone:
        warn(f"energía no monótona para {rep}", stage="relax")
    return out.length


def axis_integral(phi: BumpField, group: GroupPresentation, rep: Word, *,
                  step: float = 0.01) -> float:
    """∮ φ ds sobre el eje g₀ de la palabra, un período."""
    m = group.word_matrix(rep)
    ell0 = m.translation_length()
    if ell0 <= 0.0:
        raise GeometryError("la palabra no es hiperbólica", word=rep)
    if phi.is_zero:
        return 0.0
    n = max(8, int(math.ceil(ell0 / step)))
    s = np.linspace(0.0, ell0, n + 1)
    z = apply_mobius_array(axis_frame(m), 1j * np.exp(s))
    return float(trapezoid(phi.value(z), s))


# ──────────────────────────────────────────────────────────────────────────────
# Busemann aproximado
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, slots=True)
class BusemannApprox:
    value: float
    bound: float
    t: float


def ray_point(x: HPoint, xi: BoundaryPoint, t: float) -> HPoint:
    """Punto a parámetro t sobre el rayo g₀ [x, ξ)."""
    return flow(UnitTangent(x, visual_angle(x, xi)), t).base


def busemann_approx(metric: ConformalMetric, xi: BoundaryPoint, x: HPoint, y: HPoint,
                    t: float, *, tol: float = 1e-7) -> BusemannApprox:
    if x == y:
        return BusemannApprox(0.0, 0.0, t)
    if t < hyp_distance(x, y) + 2.0:
        raise ConfigError("el horizonte debe cumplir t ≥ d₀(x, y) + 2",
                          t=t, d0=hyp_distance(x, y))
    xt = ray_point(x, xi, t)
    value = (perturbed_distance(metric, x, xt, tol=tol)
             - perturbed_distance(metric, y, xt, tol=tol))
    a = metric.a_eps if not metric.is_flat else 1.0
    bound = 2.0 * perturbed_distance(metric, x, y, tol=tol) * math.exp(-a * t)
    return BusemannApprox(value, bound, t)

