# src/sprlab/domain/hyperbolic.py
"""
Geometría exacta del semiplano superior (curvatura -1).

Puntos, borde (recta real extendida), isometrías PSL(2,R), distancias,
funciones de Busemann, coordenadas de Hopf, sombras y bolas dinámicas.
Todo es inmutable; las variantes vectorizadas trabajan sobre arrays
complejos de numpy.
"""
from __future__ import annotations
import cmath
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from sprlab.core.errors import GeometryError

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
DET_TOL = 1e-12
DEFAULT_BALL_STEP = 0.05


def _wrap(angle: float) -> float:
    a = math.fmod(angle, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    return 0.0 if a >= TWO_PI else a


# ──────────────────────────────────────────────────────────────────────────────
# Tipos
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, slots=True)
class HPoint:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)) or self.y <= 0.0:
            raise GeometryError("punto fuera del semiplano abierto",
                                x=self.x, y=self.y)

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z: complex) -> HPoint:
        return cls(float(z.real), float(z.imag))


BASEPOINT = HPoint(0.0, 1.0)


@dataclass(frozen=True, slots=True)
class BoundaryPoint:
    """Punto de R ∪ {∞}; `value=None` es Infinity."""
    value: Optional[float] = None

    def __post_init__(self) -> None:
        if self.value is not None and not math.isfinite(self.value):
            raise GeometryError("punto de borde no finito", value=self.value)

    @classmethod
    def finite(cls, xi: float) -> BoundaryPoint:
        return cls(float(xi))

    @classmethod
    def infinity(cls) -> BoundaryPoint:
        return cls(None)

    @property
    def is_infinity(self) -> bool:
        return self.value is None

    def disk_angle(self) -> float:
        """Ángulo de la imagen por Cayley z ↦ (z-i)/(z+i); ∞ ↦ 0."""
        if self.value is None:
            return 0.0
        return _wrap(cmath.phase((self.value - 1j) / (self.value + 1j)))

    def close_to(self, other: BoundaryPoint, tol: float = 1e-9) -> bool:
        diff = abs(self.disk_angle() - other.disk_angle())
        return min(diff, TWO_PI - diff) <= tol


INFINITY = BoundaryPoint.infinity()


@dataclass(frozen=True, slots=True)
class MobiusMap:
    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_entries(cls, a: float, b: float, c: float, d: float) -> MobiusMap:
        det = a * d - b * c
        if not det > 0.0:
            raise GeometryError("matriz degenerada o que invierte orientación",
                                det=det)
        s = math.sqrt(det)
        a, b, c, d = a / s, b / s, c / s, d / s
        scale = max(abs(a), abs(b), abs(c), abs(d))
        for e in (a, b, c, d):
            if abs(e) > 1e-14 * scale:
                if e < 0.0:
                    a, b, c, d = -a, -b, -c, -d
                break
        return cls(a, b, c, d)

    @classmethod
    def identity(cls) -> MobiusMap:
        return cls(1.0, 0.0, 0.0, 1.0)

    # -------------------- álgebra -------------------- #
    def __matmul__(self, other: MobiusMap) -> MobiusMap:
        return MobiusMap.from_entries(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> MobiusMap:
        return MobiusMap.from_entries(self.d, -self.b, -self.c, self.a)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def drift(self) -> float:
        """|det-1| relativo a la escala de las entradas."""
        scale = max(1.0, self.a ** 2, self.b ** 2, self.c ** 2, self.d ** 2)
        return abs(self.det - 1.0) / scale

    @property
    def trace(self) -> float:
        return self.a + self.d

    def is_identity(self, tol: float = 1e-12) -> bool:
        return (abs(self.a - 1.0) <= tol and abs(self.b) <= tol
                and abs(self.c) <= tol and abs(self.d - 1.0) <= tol)

    def kind(self, tol: float = 1e-9) -> str:
        t = abs(self.trace)
        if t > 2.0 + tol:
            return "hyperbolic"
        if t >= 2.0 - tol:
            return "identity" if self.is_identity() else "parabolic"
        return "elliptic"

    def translation_length(self) -> float:
        t = abs(self.trace)
        return 2.0 * math.acosh(t / 2.0) if t > 2.0 else 0.0

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def hash_key(self, tol: float = 1e-8) -> Tuple[int, int, int, int]:
        return tuple(int(round(e / tol)) for e in self.as_tuple())  # type: ignore[return-value]

    # -------------------- acción -------------------- #
    def apply_complex(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivative(self, z):
        return 1.0 / (self.c * z + self.d) ** 2

    def apply_boundary(self, xi: BoundaryPoint) -> BoundaryPoint:
        if xi.is_infinity:
            if self.c == 0.0:
                return INFINITY
            return BoundaryPoint.finite(self.a / self.c)
        den = self.c * xi.value + self.d
        if den == 0.0:
            return INFINITY
        return BoundaryPoint.finite((self.a * xi.value + self.b) / den)

    def fixed_points(self) -> Tuple[BoundaryPoint, ...]:
        a, b, c, d = self.as_tuple()
        if abs(c) <= 1e-15:
            if abs(a - d) <= 1e-15:
                return (INFINITY,)
            return (INFINITY, BoundaryPoint.finite(b / (d - a)))
        disc = (a - d) ** 2 + 4.0 * b * c
        if disc < 0.0:
            return ()
        r = math.sqrt(disc)
        return tuple(BoundaryPoint.finite(((a - d) + s * r) / (2.0 * c))
                     for s in ((-1.0, 1.0) if r > 0.0 else (1.0,)))


def translation(t: float) -> MobiusMap:
    return MobiusMap(1.0, t, 0.0, 1.0)


def dilation(lam: float) -> MobiusMap:
    """z ↦ e^{lam} z: traslación de longitud `lam` sobre el eje imaginario."""
    return MobiusMap(math.exp(0.5 * lam), 0.0, 0.0, math.exp(-0.5 * lam))


def rotation_at_i(phi: float) -> MobiusMap:
    """Rotación de ángulo `phi` alrededor de i."""
    c, s = math.cos(0.5 * phi), math.sin(0.5 * phi)
    return MobiusMap.from_entries(c, s, -s, c)


def point_frame(p: HPoint) -> MobiusMap:
    """T(z) = y z + x: lleva i a p sin girar direcciones."""
    r = math.sqrt(p.y)
    return MobiusMap(r, p.x / r, 0.0, 1.0 / r)


def rotation_about(p: HPoint, phi: float) -> MobiusMap:
    t = point_frame(p)
    return t @ rotation_at_i(phi) @ t.inverse()


def apply_mobius(m: MobiusMap, p: HPoint) -> HPoint:
    return HPoint.from_complex(m.apply_complex(p.z))


def apply_mobius_array(m: MobiusMap, z: np.ndarray) -> np.ndarray:
    return (m.a * z + m.b) / (m.c * z + m.d)


# ──────────────────────────────────────────────────────────────────────────────
# Distancias y Busemann
# ──────────────────────────────────────────────────────────────────────────────

def hyp_distance(p: HPoint, q: HPoint) -> float:
    num = math.hypot(p.x - q.x, p.y - q.y)
    if num == 0.0:
        return 0.0
    return 2.0 * math.asinh(num / (2.0 * math.sqrt(p.y * q.y)))


def hyp_distance_arrays(z1, z2):
    """Versión vectorizada sobre arrays complejos (broadcasting de numpy)."""
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    return 2.0 * np.arcsinh(np.abs(z1 - z2) / (2.0 * np.sqrt(z1.imag * z2.imag)))


def _horo_height(xi: BoundaryPoint, z: complex) -> float:
    if xi.is_infinity:
        return z.imag
    return z.imag / abs(z - xi.value) ** 2


def busemann_exact(xi: BoundaryPoint, x: HPoint, y: HPoint) -> float:
    return math.log(_horo_height(xi, y.z) / _horo_height(xi, x.z))


# ──────────────────────────────────────────────────────────────────────────────
# Vectores tangentes, flujo geodésico y Hopf
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, slots=True)
class UnitTangent:
    base: HPoint
    angle: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.angle):
            raise GeometryError("ángulo no finito", angle=self.angle)
        object.__setattr__(self, "angle", _wrap(self.angle))

    def rotated(self, phi: float) -> UnitTangent:
        return UnitTangent(self.base, self.angle + phi)

    def reversed(self) -> UnitTangent:
        return self.rotated(math.pi)


@dataclass(frozen=True, slots=True)
class HopfCoordinates:
    xi_minus: BoundaryPoint
    xi_plus: BoundaryPoint
    t: float

    def __post_init__(self) -> None:
        if self.xi_minus.close_to(self.xi_plus, 0.0):
            raise GeometryError("extremos de Hopf coincidentes")


def frame(v: UnitTangent) -> MobiusMap:
    """Isometría que lleva (i, vertical) a v."""
    return point_frame(v.base) @ rotation_at_i(v.angle - HALF_PI)


def from_frame(m: MobiusMap, t: float = 0.0) -> UnitTangent:
    """Imagen por m del vector vertical en i·e^t."""
    z = 1j * math.exp(t)
    w = m.c * z + m.d
    return UnitTangent(HPoint.from_complex(m.apply_complex(z)),
                       HALF_PI - 2.0 * cmath.phase(w))


def flow(v: UnitTangent, t: float) -> UnitTangent:
    return from_frame(frame(v), t)


def flow_points(v: UnitTangent, ts: np.ndarray) -> np.ndarray:
    m = frame(v)
    z = 1j * np.exp(np.asarray(ts, dtype=float))
    return apply_mobius_array(m, z)


def apply_to_tangent(m: MobiusMap, v: UnitTangent) -> UnitTangent:
    z = v.base.z
    return UnitTangent(HPoint.from_complex(m.apply_complex(z)),
                       v.angle - 2.0 * cmath.phase(m.c * z + m.d))


def endpoints(v: UnitTangent) -> Tuple[BoundaryPoint, BoundaryPoint]:
    m = frame(v)
    return m.apply_boundary(BoundaryPoint.finite(0.0)), m.apply_boundary(INFINITY)


def hopf_coords(v: UnitTangent, o: HPoint = BASEPOINT) -> HopfCoordinates:
    xm, xp = endpoints(v)
    return HopfCoordinates(xm, xp, busemann_exact(xp, o, v.base))


def geodesic_frame(xi_minus: BoundaryPoint, xi_plus: BoundaryPoint) -> MobiusMap:
    """G con G(0)=xi_minus, G(∞)=xi_plus (preserva orientación)."""
    if xi_minus.close_to(xi_plus, 0.0):
        raise GeometryError("extremos coincidentes")
    if xi_plus.is_infinity:
        return translation(xi_minus.value)
    if xi_minus.is_infinity:
        return MobiusMap.from_entries(xi_plus.value, -1.0, 1.0, 0.0)
    a, b = xi_minus.value, xi_plus.value
    if b > a:
        return MobiusMap.from_entries(b, a, 1.0, 1.0)
    return MobiusMap.from_entries(b, -a, 1.0, -1.0)


def axis_endpoints(m: MobiusMap) -> Tuple[BoundaryPoint, BoundaryPoint]:
    """(repulsor, atractor) de un elemento hiperbólico."""
    if m.kind() != "hyperbolic":
        raise GeometryError("el elemento no es hiperbólico", trace=m.trace)
    fps = m.fixed_points()
    if len(fps) != 2:
        raise GeometryError("puntos fijos no resueltos", trace=m.trace)

    def multiplier(xi: BoundaryPoint) -> float:
        if xi.is_infinity:
            return abs(m.d / m.a)
        return abs(m.derivative(xi.value))

    rep, att = sorted(fps, key=multiplier, reverse=True)
    return rep, att


def axis_frame(m: MobiusMap) -> MobiusMap:
    """A con A⁻¹ m A = (z ↦ e^ℓ z): el eje imaginario recorre el eje de m."""
    rep, att = axis_endpoints(m)
    return geodesic_frame(rep, att)


def hopf_inverse(h: HopfCoordinates, o: HPoint = BASEPOINT) -> UnitTangent:
    g = geodesic_frame(h.xi_minus, h.xi_plus)
    s = h.t - busemann_exact(h.xi_plus, o, apply_mobius(g, BASEPOINT))
    return from_frame(g, s)


def direction_to(p: HPoint, q: HPoint) -> float:
    """Ángulo euclídeo en p del vector tangente a la geodésica [p, q]."""
    s = point_frame(p).inverse()
    w = s.apply_complex(q.z)
    return _wrap(cmath.phase((w - 1j) / (w + 1j)) + HALF_PI)


def geodesic_points(p: HPoint, q: HPoint, ts: np.ndarray) -> np.ndarray:
    """Puntos del segmento g₀ [p, q] a longitud de arco `ts` desde p."""
    return flow_points(UnitTangent(p, direction_to(p, q)), ts)


# ──────────────────────────────────────────────────────────────────────────────
# Borde: ángulos visuales, arcos, sombras
# ──────────────────────────────────────────────────────────────────────────────

def visual_angle(o: HPoint, xi: BoundaryPoint) -> float:
    s = point_frame(o).inverse()
    return _wrap(s.apply_boundary(xi).disk_angle() + HALF_PI)


def visual_angles_of_points(o: HPoint, z: np.ndarray) -> np.ndarray:
    """Dirección en o del rayo que pasa por cada punto de `z`."""
    w = (np.asarray(z) - o.x) / o.y
    return np.mod(np.angle((w - 1j) / (w + 1j)) + HALF_PI, TWO_PI)


def ray_endpoint(o: HPoint, angle: float) -> BoundaryPoint:
    return endpoints(UnitTangent(o, angle))[1]


@dataclass(frozen=True, slots=True)
class BoundaryArc:
    """Arco recorrido en sentido positivo (creciente en R) de start a end."""
    start: BoundaryPoint = INFINITY
    end: BoundaryPoint = INFINITY
    full: bool = False

    def __post_init__(self) -> None:
        if not self.full and self.start.close_to(self.end, 0.0):
            raise GeometryError("arco degenerado: extremos iguales")

    @classmethod
    def whole(cls) -> BoundaryArc:
        return cls(full=True)

    def span(self) -> float:
        if self.full:
            return TWO_PI
        return (self.end.disk_angle() - self.start.disk_angle()) % TWO_PI

    def contains(self, xi: BoundaryPoint, tol: float = 0.0) -> bool:
        if self.full:
            return True
        pos = (xi.disk_angle() - self.start.disk_angle()) % TWO_PI
        return pos <= self.span() + tol or pos >= TWO_PI - tol

    def contains_angles(self, o: HPoint, angles: np.ndarray) -> np.ndarray:
        """Pertenencia de direcciones visuales en o (vectorizado)."""
        if self.full:
            return np.ones(np.shape(angles), dtype=bool)
        a0 = visual_angle(o, self.start)
        width = self.visual_width(o)
        return np.mod(np.asarray(angles) - a0, TWO_PI) <= width

    def complement(self) -> BoundaryArc:
        if self.full:
            raise GeometryError("el complemento del borde completo es vacío")
        return BoundaryArc(self.end, self.start)

    def visual_width(self, o: HPoint) -> float:
        if self.full:
            return TWO_PI
        return (visual_angle(o, self.end) - visual_angle(o, self.start)) % TWO_PI

    def overlaps(self, other: BoundaryArc, tol: float = 1e-9) -> bool:
        if self.full or other.full:
            return True
        return (_inside_open(self, other.start, tol)
                or _inside_open(other, self.start, tol)
                or self.start.close_to(other.start, tol)
                or self.end.close_to(other.end, tol))


def _inside_open(arc: BoundaryArc, xi: BoundaryPoint, tol: float) -> bool:
    pos = (xi.disk_angle() - arc.start.disk_angle()) % TWO_PI
    return tol < pos < arc.span() - tol


def shadow_arc(o: HPoint, center: HPoint, R: float) -> BoundaryArc:
    if R <= 0.0:
        raise GeometryError("radio de sombra no positivo", R=R)
    d = hyp_distance(o, center)
    if d <= R:
        return BoundaryArc.whole()
    alpha = direction_to(o, center)
    beta = math.asin(min(1.0, math.sinh(R) / math.sinh(d)))
    return BoundaryArc(ray_endpoint(o, alpha - beta), ray_endpoint(o, alpha + beta))


def bisector_arc(o: HPoint, q: HPoint) -> BoundaryArc:
    """Arco del semiplano de puntos más cerca de q que de o (pared de Dirichlet)."""
    d = hyp_distance(o, q)
    if d == 0.0:
        raise GeometryError("bisectriz de puntos coincidentes")
    mid = flow(UnitTangent(o, direction_to(o, q)), 0.5 * d)
    return BoundaryArc(ray_endpoint(mid.base, mid.angle - HALF_PI),
                       ray_endpoint(mid.base, mid.angle + HALF_PI))


# ──────────────────────────────────────────────────────────────────────────────
# Bolas dinámicas
# ──────────────────────────────────────────────────────────────────────────────

def _grid(T: float, step: float) -> np.ndarray:
    ts = np.arange(0.0, T, step)
    return np.append(ts, T) if T > 0.0 else np.zeros(1)


def dynamical_ball_contains(v: UnitTangent, w: UnitTangent, T: float, eps: float,
                            step: float = DEFAULT_BALL_STEP) -> bool:
    """
    w ∈ B(v, T, eps) certificado sólo sobre la malla {0, step, ..., T}.
    """
    if T < 0.0 or eps <= 0.0 or step <= 0.0:
        raise GeometryError("parámetros de bola dinámica inválidos",
                            T=T, eps=eps, step=step)
    ts = _grid(T, step)
    gaps = hyp_distance_arrays(flow_points(v, ts), flow_points(w, ts))
    return bool(np.all(gaps <= eps))
