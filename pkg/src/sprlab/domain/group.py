# src/sprlab/domain/group.py
"""
Grupos libres de isometrías en posición de ping-pong.

Enumeración de órbitas por BFS sobre palabras reducidas, exponentes de
crecimiento, reducción de Dirichlet, geodésicas cerradas primitivas y
átomos de Patterson truncados.
"""
from __future__ import annotations
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp, ndtr
from scipy.stats import linregress

from sprlab.core.errors import (
    BudgetExceeded, ConfigError, EmptyTail, GeometryError, InsufficientData,
    NonTermination, PingPongViolation,
)
from sprlab.core.log import debug, log
from sprlab.domain.hyperbolic import (
    BASEPOINT, BoundaryArc, BoundaryPoint, HPoint, MobiusMap, bisector_arc,
    hyp_distance_arrays, visual_angles_of_points,
)
from sprlab.domain.records import ClosedGeodesic, ExponentEstimate, OrbitPoint, Word

GroupKind = Literal["Schottky", "GeometricallyFiniteFree"]

PING_PONG_TOL = 1e-7
DEFAULT_WORD_CAP = 2_000_000
DEFAULT_MAX_STEPS = 10_000


# ──────────────────────────────────────────────────────────────────────────────
# Palabras
# ──────────────────────────────────────────────────────────────────────────────

def free_reduce(letters: Iterable[int]) -> Word:
    out: List[int] = []
    for x in letters:
        if x == 0:
            raise GeometryError("letra nula en palabra")
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def invert_word(w: Word) -> Word:
    return tuple(-x for x in reversed(w))


def cyclic_reduce(w: Word) -> Word:
    w = free_reduce(w)
    while len(w) >= 2 and w[0] == -w[-1]:
        w = w[1:-1]
    return w


def is_primitive(w: Word) -> bool:
    n = len(w)
    for p in range(1, n // 2 + 1):
        if n % p == 0 and w == w[:p] * (n // p):
            return False
    return n > 0


def canonical_class(w: Word, invert_dedup: bool = False) -> Word:
    """Representante canónico de la clase de conjugación (rotación mínima)."""
    w = cyclic_reduce(w)
    if not w:
        return w
    cands = [w[i:] + w[:i] for i in range(len(w))]
    if invert_dedup:
        iw = invert_word(w)
        cands += [iw[i:] + iw[:i] for i in range(len(iw))]
    return min(cands)


def format_word(w: Word, labels: Optional[Sequence[str]] = None) -> str:
    if not w:
        return "e"
    if labels is None:
        return ",".join(str(x) for x in w)
    return "".join(labels[abs(x) - 1] + ("⁻¹" if x < 0 else "") for x in w)


# ──────────────────────────────────────────────────────────────────────────────
# Presentación
# ──────────────────────────────────────────────────────────────────────────────

Disk = Tuple[float, float]


@dataclass(frozen=True)
class GroupPresentation:
    generators: Tuple[Tuple[str, MobiusMap], ...]
    kind: GroupKind
    basepoint: HPoint = BASEPOINT
    # Por generador: (disco de ℓ, disco de ℓ⁻¹); None = paredes de Dirichlet
    disks: Optional[Tuple[Tuple[Disk, Disk], ...]] = None

    def __post_init__(self) -> None:
        self.validate()

    # -------------------- acceso -------------------- #
    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def labels(self) -> List[str]:
        return [lab for lab, _ in self.generators]

    def letters(self) -> List[int]:
        out: List[int] = []
        for i in range(1, self.rank + 1):
            out += [i, -i]
        return out

    @cached_property
    def _maps(self) -> Dict[int, MobiusMap]:
        out: Dict[int, MobiusMap] = {}
        for i, (_, m) in enumerate(self.generators, start=1):
            out[i] = m
            out[-i] = m.inverse()
        return out

    def letter_map(self, letter: int) -> MobiusMap:
        return self._maps[letter]

    def word_matrix(self, w: Word) -> MobiusMap:
        m = MobiusMap.identity()
        for x in w:
            m = m @ self._maps[x]
        return m

    def apply_word(self, w: Word, p: HPoint) -> HPoint:
        return HPoint.from_complex(self.word_matrix(w).apply_complex(p.z))

    @cached_property
    def _targets(self) -> Dict[int, complex]:
        o = self.basepoint.z
        return {x: m.apply_complex(o) for x, m in self._maps.items()}

    def displacement(self, letter: int) -> float:
        return float(hyp_distance_arrays(self.basepoint.z, self._targets[letter]))

    def max_displacement(self) -> float:
        return max(self.displacement(x) for x in self.letters())

    @property
    def uses_dirichlet(self) -> bool:
        return self.disks is None

    def default_slack(self) -> float:
        # Con paredes de Dirichlet d(o, γo) crece a lo largo de los prefijos
        return 0.0 if self.uses_dirichlet else 2.0 * self.max_displacement()

    # -------------------- dominios de ping-pong -------------------- #
    def _disk(self, letter: int) -> Disk:
        assert self.disks is not None
        pair = self.disks[abs(letter) - 1]
        return pair[0] if letter > 0 else pair[1]

    def domain(self, letter: int) -> BoundaryArc:
        if self.disks is None:
            return bisector_arc(self.basepoint, HPoint.from_complex(self._targets[letter]))
        c, r = self._disk(letter)
        return BoundaryArc(BoundaryPoint.finite(c - r), BoundaryPoint.finite(c + r))

    def in_domain(self, letter: int, z: np.ndarray, tol: float = PING_PONG_TOL) -> np.ndarray:
        """Pertenencia (vectorizada) al semiplano cerrado D(letter)."""
        z = np.asarray(z)
        if self.disks is None:
            o = self.basepoint.z
            q = self._targets[letter]
            return hyp_distance_arrays(z, q) <= hyp_distance_arrays(z, o) + tol
        c, r = self._disk(letter)
        return np.abs(z - c) <= r * (1.0 + tol)

    def validate(self) -> None:
        if not self.generators:
            raise GeometryError("grupo sin generadores")
        for lab, m in self.generators:
            kind = m.kind()
            if kind in ("identity", "elliptic"):
                raise GeometryError("generador no admisible", label=lab, kind=kind)
        if self.disks is not None:
            if len(self.disks) != self.rank:
                raise GeometryError("un par de discos por generador", rank=self.rank)
            o = self.basepoint.z
            for x in self.letters():
                c, r = self._disk(x)
                if r <= 0.0:
                    raise GeometryError("radio de disco no positivo", letter=x)
                if abs(o - c) <= r:
                    raise PingPongViolation("el punto base cae dentro de un disco", letter=x)
                # x lleva el exterior de D(x⁻¹) sobre D(x)
                inv = self.domain(-x)
                img = BoundaryArc(self._maps[x].apply_boundary(inv.end),
                                  self._maps[x].apply_boundary(inv.start))
                own = self.domain(x)
                if not (img.start.close_to(own.start, 1e-7) and img.end.close_to(own.end, 1e-7)):
                    raise PingPongViolation("el generador no empareja sus discos", letter=x)
        letters = self.letters()
        arcs = {x: self.domain(x) for x in letters}
        for i, x in enumerate(letters):
            for y in letters[i + 1:]:
                if arcs[x].overlaps(arcs[y]):
                    raise PingPongViolation("dominios de ping-pong no disjuntos",
                                            letters=(x, y))


def make_group(generators: Sequence[Tuple[str, MobiusMap]],
               basepoint: HPoint = BASEPOINT,
               disks: Optional[Sequence[Tuple[Disk, Disk]]] = None) -> GroupPresentation:
    gens = tuple(generators)
    parabolic = any(m.kind() == "parabolic" for _, m in gens)
    kind: GroupKind = "GeometricallyFiniteFree" if parabolic else "Schottky"
    return GroupPresentation(gens, kind, basepoint,
                             tuple(disks) if disks is not None else None)


def schottky_product(g: GroupPresentation, h: GroupPresentation) -> GroupPresentation:
    """Producto libre de dos presentaciones con dominios disjuntos."""
    if g.basepoint != h.basepoint:
        raise GeometryError("los factores deben compartir punto base")
    if (g.disks is None) != (h.disks is None):
        raise GeometryError("no se mezclan discos explícitos con paredes de Dirichlet")
    disks = None if g.disks is None else g.disks + h.disks  # type: ignore[operator]
    return make_group(g.generators + h.generators, g.basepoint, disks)


# ──────────────────────────────────────────────────────────────────────────────
# Enumeración de la órbita
# ──────────────────────────────────────────────────────────────────────────────

@dataclass
class _Frontier:
    words: List[Word]
    mats: np.ndarray        # (n, 4): a, b, c, d
    z: np.ndarray           # γ·o
    dist: np.ndarray

    def __len__(self) -> int:
        return len(self.words)


def _compose(mats: np.ndarray, m: MobiusMap) -> np.ndarray:
    a = mats[:, 0] * m.a + mats[:, 1] * m.c
    b = mats[:, 0] * m.b + mats[:, 1] * m.d
    c = mats[:, 2] * m.a + mats[:, 3] * m.c
    d = mats[:, 2] * m.b + mats[:, 3] * m.d
    s = np.sqrt(a * d - b * c)
    return np.stack([a / s, b / s, c / s, d / s], axis=1)


def _expand(group: GroupPresentation, fr: _Frontier, limit: float) -> _Frontier:
    o = group.basepoint.z
    last = np.array([w[-1] if w else 0 for w in fr.words], dtype=np.int64)
    words: List[Word] = []
    mats, zs, ds = [], [], []
    for x in group.letters():
        idx = np.nonzero(last != -x)[0]
        if idx.size == 0:
            continue
        m2 = _compose(fr.mats[idx], group.letter_map(x))
        z = (m2[:, 0] * o + m2[:, 1]) / (m2[:, 2] * o + m2[:, 3])
        dist = hyp_distance_arrays(o, z)
        keep = dist <= limit
        if not keep.any():
            continue
        for i in idx[keep]:
            words.append(fr.words[i] + (x,))
        mats.append(m2[keep])
        zs.append(z[keep])
        ds.append(dist[keep])
    if not words:
        return _Frontier([], np.zeros((0, 4)), np.zeros(0, complex), np.zeros(0))
    return _Frontier(words, np.concatenate(mats), np.concatenate(zs), np.concatenate(ds))


def _check_ping_pong(group: GroupPresentation, fr: _Frontier) -> None:
    first = np.array([w[0] for w in fr.words], dtype=np.int64)
    for x in group.letters():
        sel = first == x
        if sel.any():
            ok = group.in_domain(x, fr.z[sel])
            if not ok.all():
                bad = fr.words[int(np.nonzero(sel)[0][np.argmin(ok)])]
                raise PingPongViolation("punto de órbita fuera de su dominio de ping-pong",
                                        word=bad)


def _split(fr: _Frontier, parts: int) -> List[_Frontier]:
    if parts <= 1 or len(fr) < 2 * parts:
        return [fr]
    bounds = np.linspace(0, len(fr), parts + 1).astype(int)
    return [_Frontier(fr.words[a:b], fr.mats[a:b], fr.z[a:b], fr.dist[a:b])
            for a, b in zip(bounds, bounds[1:]) if b > a]


def _concat(parts: List[_Frontier]) -> _Frontier:
    parts = [p for p in parts if len(p)]
    if not parts:
        return _Frontier([], np.zeros((0, 4)), np.zeros(0, complex), np.zeros(0))
    words: List[Word] = []
    for p in parts:
        words += p.words
    return _Frontier(words, np.concatenate([p.mats for p in parts]),
                     np.concatenate([p.z for p in parts]),
                     np.concatenate([p.dist for p in parts]))


def orbit_sort_key(p: OrbitPoint) -> Tuple[float, int, Word]:
    return (p.dist, len(p.word), p.word)


def enumerate_orbit(group: GroupPresentation, R_max: float, *,
                    word_cap: int = DEFAULT_WORD_CAP,
                    slack: Optional[float] = None,
                    threads: int = 1) -> List[OrbitPoint]:
    """
    Todas las palabras reducidas con d(o, γo) ≤ R_max, una vez cada una,
    ordenadas por (dist, longitud, palabra).
    """
    if R_max <= 0.0:
        raise GeometryError("R_max debe ser positivo", R_max=R_max)
    slack = group.default_slack() if slack is None else slack
    limit = R_max + slack
    o = group.basepoint.z
    fr = _Frontier([()], np.array([[1.0, 0.0, 0.0, 1.0]]), np.array([o]), np.zeros(1))
    kept: List[_Frontier] = [fr]
    total = 1
    level = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while len(fr):
            level += 1
            chunks = _split(fr, threads)
            if pool is None:
                fr = _expand(group, fr, limit)
            else:
                fr = _concat(list(pool.map(lambda c: _expand(group, c, limit), chunks)))
            if not len(fr):
                break
            _check_ping_pong(group, fr)
            total += len(fr)
            if total > word_cap:
                raise BudgetExceeded("tope de palabras superado en la enumeración",
                                     cap=word_cap, level=level, R_max=R_max)
            kept.append(fr)
            debug(f"nivel {level}: {len(fr)} palabras", stage="enumerate")
    finally:
        if pool is not None:
            pool.shutdown()

    out: List[OrbitPoint] = []
    for f in kept:
        for w, z, d in zip(f.words, f.z, f.dist):
            if d <= R_max:
                out.append(OrbitPoint(w, HPoint(float(z.real), float(z.imag)), float(d)))
    out.sort(key=orbit_sort_key)
    log(f"órbita: {len(out)} puntos con d ≤ {R_max:g} ({level} niveles)", stage="enumerate")
    return out


def collision_audit(group: GroupPresentation, orbit: Sequence[OrbitPoint],
                    tol: float = 1e-8) -> List[Tuple[Word, Word]]:
    """Pares de palabras distintas con la misma matriz (a tolerancia `tol`)."""
    seen: Dict[Tuple[int, int, int, int], Word] = {}
    hits: List[Tuple[Word, Word]] = []
    for p in orbit:
        key = group.word_matrix(p.word).hash_key(tol)
        if key in seen:
            hits.append((seen[key], p.word))
        else:
            seen[key] = p.word
    return hits


# ──────────────────────────────────────────────────────────────────────────────
# Exponentes de crecimiento
# ──────────────────────────────────────────────────────────────────────────────

def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = max(2, int(math.floor((hi - lo) / step + 1e-9)) + 1)
    return np.linspace(lo, lo + (n - 1) * step, n)


def _fit(xs: np.ndarray, ys: np.ndarray) -> Tuple[float, float, float]:
    """(pendiente, RMS del residuo, error estándar de la pendiente)."""
    fit = linregress(xs, ys)
    resid = ys - (fit.intercept + fit.slope * xs)
    return float(fit.slope), float(np.sqrt(np.mean(resid ** 2))), float(fit.stderr)


def _shell_root(d: np.ndarray, lo: float, hi: float, step: float) -> Optional[float]:
    """s tal que las sumas por capas Σ e^{-s d} dejan de crecer con R."""
    width = max(1.0, 0.25 * (hi - lo))
    Rs = _grid(lo + width, hi, step)
    if len(Rs) < 3:
        return None
    d = np.sort(d)
    i_hi = np.searchsorted(d, Rs, side="right")
    i_lo = np.searchsorted(d, Rs - width, side="right")
    if np.any(i_hi <= i_lo):
        return None

    def slope(s: float) -> float:
        logs = np.array([logsumexp(-s * d[a:b]) for a, b in zip(i_lo, i_hi)])
        return float(linregress(Rs, logs).slope)

    f0 = slope(0.0)
    if not math.isfinite(f0):
        return None
    if f0 <= 0.0:
        return 0.0
    hi_s = 2.0
    f_hi = slope(hi_s)
    while math.isfinite(f_hi) and f_hi > 0.0 and hi_s < 16.0:
        hi_s *= 2.0
        f_hi = slope(hi_s)
    if not (math.isfinite(f_hi) and f_hi < 0.0):
        debug(f"sin cambio de signo para el estimador por capas (s = {hi_s})",
              stage="exponent")
        return None
    return float(brentq(slope, 0.0, hi_s, xtol=1e-10))


def estimate_from_distances(dists: np.ndarray, window: Tuple[float, float], *,
                            grid_step: float = 0.1, min_points: int = 50,
                            secondary: bool = True) -> ExponentEstimate:
    lo, hi = window
    if lo < 2.0 or hi <= lo:
        raise ConfigError("ventana inválida", window=window)
    d = np.sort(np.asarray(dists, dtype=float))
    in_window = int(np.count_nonzero((d >= lo) & (d <= hi)))
    if in_window < min_points:
        raise InsufficientData("pocos puntos en la ventana", count=in_window,
                               required=min_points, window=window)
    Rs = _grid(lo, hi, grid_step)
    N = np.searchsorted(d, Rs, side="right").astype(float)
    seen = N > 0.0
    if np.count_nonzero(seen) < 3:
        raise InsufficientData("conteo vacío en casi toda la ventana", window=window)
    Rs, N = Rs[seen], N[seen]
    slope, resid, se = _fit(Rs, np.log(N))
    upper = Rs >= 0.5 * (lo + hi)
    ratio_max = float(np.max(np.log(N[upper]) / Rs[upper]))
    sec = _shell_root(d, lo, hi, grid_step) if secondary else None
    value = min(1.0, max(0.0, slope))
    return ExponentEstimate(value, (lo, hi), resid, int(N[-1]), sec, ratio_max, se)


def estimate_from_shells(dists: np.ndarray, window: Tuple[float, float], *,
                         width: float = 1.0, grid_step: float = 0.1,
                         min_points: int = 30) -> ExponentEstimate:
    """
    Pendiente de log n(R) con n(R) = #{R - width < d ≤ R}. A diferencia del
    conteo acumulado no depende de lo que haya por debajo de la ventana.
    """
    lo, hi = window
    if lo < 2.0 or hi - lo <= width:
        raise ConfigError("ventana inválida para capas", window=window, width=width)
    d = np.sort(np.asarray(dists, dtype=float))
    in_window = int(np.count_nonzero((d > lo) & (d <= hi)))
    if in_window < min_points:
        raise InsufficientData("pocos puntos en la ventana", count=in_window,
                               required=min_points, window=window)
    Rs = _grid(lo + width, hi, grid_step)
    n = (np.searchsorted(d, Rs, side="right")
         - np.searchsorted(d, Rs - width, side="right")).astype(float)
    seen = n > 0.0
    if np.count_nonzero(seen) < 3:
        raise InsufficientData("capas vacías en casi toda la ventana", window=window)
    slope, resid, se = _fit(Rs[seen], np.log(n[seen]))
    return ExponentEstimate(min(1.0, max(0.0, slope)), (lo, hi), resid, in_window, stderr=se)


def estimate_exponent(orbit: Sequence[OrbitPoint], window: Tuple[float, float], *,
                      grid_step: float = 0.1, min_points: int = 50,
                      secondary: bool = True) -> ExponentEstimate:
    est = estimate_from_distances(np.array([p.dist for p in orbit]), window,
                                  grid_step=grid_step, min_points=min_points,
                                  secondary=secondary)
    log(f"δ̂ = {est.value:.4f} (resid {est.residual:.3g}, N = {est.count})", stage="exponent")
    gap = est.agreement()
    if gap is not None:
        log(f"estimador por capas: {est.secondary:.4f} (diferencia {gap:.3g})",
            level="DEBUG", stage="exponent")
    return est


def length_spectrum_exponent(geodesics: Sequence[ClosedGeodesic],
                             window: Tuple[float, float], *,
                             metric_id: str = "g0", grid_step: float = 0.05,
                             smooth: float = 0.0, min_classes: int = 30) -> ExponentEstimate:
    """
    Exponente del espectro primitivo: pendiente de ln(L·N(L)) en la ventana.
    Con `smooth > 0` cada longitud entra como una función de distribución
    normal de ancho `smooth`.
    """
    lo, hi = window
    lengths = np.sort([g.length(metric_id) for g in geodesics])
    in_window = int(np.count_nonzero((lengths >= lo) & (lengths <= hi)))
    if in_window < min_classes:
        raise InsufficientData("pocas clases primitivas en la ventana",
                               count=in_window, required=min_classes, window=window)
    Ls = _grid(lo, hi, grid_step)
    if smooth > 0.0:
        N = ndtr((Ls[:, None] - lengths[None, :]) / smooth).sum(axis=1)
    else:
        N = np.searchsorted(lengths, Ls, side="right").astype(float)
    if np.any(N <= 0.0):
        raise InsufficientData("espectro vacío al inicio de la ventana", window=window)
    slope, resid, se = _fit(Ls, np.log(Ls * N))
    return ExponentEstimate(max(0.0, slope), (lo, hi), resid,
                            int(np.searchsorted(lengths, hi, side="right")), stderr=se)


# ──────────────────────────────────────────────────────────────────────────────
# Reducción de Dirichlet
# ──────────────────────────────────────────────────────────────────────────────

def reduce_to_domain(group: GroupPresentation, p: HPoint, *,
                     max_steps: int = DEFAULT_MAX_STEPS) -> Tuple[HPoint, Word]:
    """
    Descenso voraz hacia o. Devuelve (p', w) con p = w·p' y p' localmente
    minimal: d(p', o) ≤ d(ℓ p', o) para toda letra ℓ.
    """
    z = p.z
    o = group.basepoint.z
    targets = group._targets
    word: List[int] = []
    for _ in range(max_steps):
        d0 = float(hyp_distance_arrays(z, o))
        best, best_d = 0, d0 - 1e-12 * (1.0 + d0)
        for x in group.letters():
            # d(x⁻¹ z, o) = d(z, x·o)
            dx = float(hyp_distance_arrays(z, targets[x]))
            if dx < best_d:
                best, best_d = x, dx
        if best == 0:
            return HPoint.from_complex(complex(z)), free_reduce(word)
        z = group.letter_map(-best).apply_complex(z)
        word.append(best)
    raise NonTermination("la reducción no terminó; ¿grupo no discreto?",
                         max_steps=max_steps, x=p.x, y=p.y)


def reduce_points(group: GroupPresentation, z: np.ndarray, *,
                  max_steps: int = DEFAULT_MAX_STEPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Versión vectorizada: devuelve (z_red, M) con z = M(z_red), M de forma (n, 4).
    """
    z = np.array(z, dtype=complex, copy=True)
    n = z.shape[0]
    M = np.tile(np.array([1.0, 0.0, 0.0, 1.0]), (n, 1))
    o = group.basepoint.z
    letters = group.letters()
    targets = np.array([group._targets[x] for x in letters])
    active = np.arange(n)
    for _ in range(max_steps):
        if active.size == 0:
            return z, M
        za = z[active]
        d0 = hyp_distance_arrays(za, o)
        dl = hyp_distance_arrays(za[:, None], targets[None, :])
        j = np.argmin(dl, axis=1)
        better = dl[np.arange(active.size), j] < d0 - 1e-12 * (1.0 + d0)
        active = active[better]
        j = j[better]
        for k, x in enumerate(letters):
            sel = active[j == k]
            if sel.size == 0:
                continue
            inv = group.letter_map(-x)
            z[sel] = (inv.a * z[sel] + inv.b) / (inv.c * z[sel] + inv.d)
            M[sel] = _compose(M[sel], group.letter_map(x))
    if active.size:
        raise NonTermination("la reducción vectorizada no terminó",
                             max_steps=max_steps, pending=int(active.size))
    return z, M


def orbit_distance(group: GroupPresentation, z: np.ndarray, **kw) -> np.ndarray:
    """d(p, Γ·o) para cada punto de `z`."""
    zr, _ = reduce_points(group, z, **kw)
    return hyp_distance_arrays(zr, group.basepoint.z)


# ──────────────────────────────────────────────────────────────────────────────
# Geodésicas cerradas
# ──────────────────────────────────────────────────────────────────────────────

def trace_length(m: MobiusMap) -> float:
    return m.translation_length()


def closed_geodesics(group: GroupPresentation, L_max: float, *,
                     invert_dedup: bool = False, slack: Optional[float] = None,
                     word_cap: int = DEFAULT_WORD_CAP,
                     orbit: Optional[Sequence[OrbitPoint]] = None,
                     threads: int = 1) -> List[ClosedGeodesic]:
    """
    Una entrada por clase primitiva con ℓ₀ ≤ L_max, ordenadas por longitud.
    Si se pasa `orbit` debe estar enumerada hasta L_max + slack.
    """
    if L_max <= 0.0:
        raise GeometryError("L_max debe ser positivo", L_max=L_max)
    slack = 2.0 * group.max_displacement() if slack is None else slack
    R = L_max + slack
    if orbit is None:
        orbit = enumerate_orbit(group, R, word_cap=word_cap, threads=threads)
    found: Dict[Word, ClosedGeodesic] = {}
    for p in orbit:
        w = p.word
        if not w or p.dist > R or w[0] == -w[-1] or not is_primitive(w):
            continue
        key = canonical_class(w, invert_dedup)
        if key in found:
            continue
        m = group.word_matrix(key)
        if abs(m.trace) <= 2.0 + 1e-12:
            continue
        ell = trace_length(m)
        if ell <= L_max:
            found[key] = ClosedGeodesic(key, ell)
    out = sorted(found.values(), key=lambda g: (g.length0, g.rep))
    log(f"{len(out)} clases primitivas con ℓ₀ ≤ {L_max:g}", stage="lengths")
    return out


def geodesics_in_band(geodesics: Sequence[ClosedGeodesic], band: Tuple[float, float],
                      metric_id: str = "g0") -> List[ClosedGeodesic]:
    lo, hi = band
    return [g for g in geodesics if lo <= g.length(metric_id) <= hi]


# ──────────────────────────────────────────────────────────────────────────────
# Átomos de Patterson
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PattersonAtoms:
    words: List[Word]
    points: np.ndarray       # γ·o
    dist: np.ndarray         # d(o, γo)
    weights: np.ndarray
    s: float
    x: HPoint
    basepoint: HPoint = BASEPOINT
    index: Dict[Word, int] = field(default_factory=dict, repr=False)

    def total(self) -> float:
        return float(self.weights.sum())

    def weight_of(self, w: Word) -> Optional[float]:
        i = self.index.get(w)
        return None if i is None else float(self.weights[i])


def patterson_atoms(group: GroupPresentation, orbit: Sequence[OrbitPoint], s: float,
                    x: Optional[HPoint] = None, *, delta_hat: float,
                    margin: float = 0.05) -> PattersonAtoms:
    """Átomos e^{-s d(x, γo)} normalizados; exige s > δ̂ y s ≥ δ̂ + margin."""
    if not (s > delta_hat and s >= delta_hat + margin):
        raise ConfigError("s debe superar δ̂ + margen", s=s, delta_hat=delta_hat,
                          margin=margin)
    o = group.basepoint
    x = o if x is None else x
    pts = np.array([p.image.z for p in orbit])
    dist = np.array([p.dist for p in orbit])
    norm = np.exp(-s * dist).sum()
    dx = dist if x == o else hyp_distance_arrays(x.z, pts)
    weights = np.exp(-s * dx) / norm
    words = [p.word for p in orbit]
    return PattersonAtoms(words, pts, dist, weights, s, x, o,
                          {w: i for i, w in enumerate(words)})


def measure_arc(atoms: PattersonAtoms, arc: BoundaryArc, R_far: float) -> float:
    """Peso relativo, entre los átomos con d ≥ R_far, de los que apuntan a `arc`."""
    tail = atoms.dist >= R_far
    if not tail.any():
        raise EmptyTail("no hay átomos más allá de R_far", R_far=R_far)
    w = atoms.weights[tail]
    ang = visual_angles_of_points(atoms.basepoint, atoms.points[tail])
    inside = arc.contains_angles(atoms.basepoint, ang)
    return float(w[inside].sum() / w.sum())
