from __future__ import annotations
import itertools
import math

import numpy as np
import pytest

from sprlab.core.config import GroupSection
from sprlab.core.errors import (
    BudgetExceeded, ConfigError, EmptyTail, GeometryError, InsufficientData,
    PingPongViolation,
)
from sprlab.domain.catalog import build_group, hyperbolic_through
from sprlab.domain.group import (
    canonical_class, closed_geodesics, collision_audit, cyclic_reduce, enumerate_orbit,
    estimate_exponent, estimate_from_distances, estimate_from_shells, format_word,
    free_reduce, invert_word, is_primitive, length_spectrum_exponent, make_group,
    measure_arc, orbit_distance, patterson_atoms, reduce_to_domain, schottky_product,
)
from sprlab.domain.hyperbolic import (
    BASEPOINT, HALF_PI, BoundaryArc, BoundaryPoint, HPoint, UnitTangent, busemann_exact, flow,
    hyp_distance, ray_endpoint, rotation_at_i, visual_angles_of_points,
)
from sprlab.domain.records import ClosedGeodesic


def _reduced_words(rank: int, max_len: int):
    letters = [x for i in range(1, rank + 1) for x in (i, -i)]
    yield ()
    for n in range(1, max_len + 1):
        for w in itertools.product(letters, repeat=n):
            if all(a != -b for a, b in zip(w, w[1:])):
                yield w


# -------------------- palabras -------------------- #
def test_word_helpers():
    assert free_reduce((1, -1, 2)) == (2,)
    assert invert_word((1, 2)) == (-2, -1)
    assert cyclic_reduce((2, 1, -2)) == (1,)
    assert is_primitive((1, 2))
    assert not is_primitive((1, 1))
    assert not is_primitive(())
    assert format_word(()) == "e"
    assert format_word((1, -2), ["a", "b"]) == "ab⁻¹"
    with pytest.raises(GeometryError):
        free_reduce((1, 0))


def test_canonical_class_is_conjugation_invariant():
    assert canonical_class((2, 1, -2)) == canonical_class((1,))
    assert canonical_class((1, 2)) == canonical_class((2, 1))
    assert canonical_class((1, 2), invert_dedup=True) == canonical_class((-2, -1),
                                                                          invert_dedup=True)


# -------------------- presentación -------------------- #
def test_overlapping_domains_violate_ping_pong():
    with pytest.raises(PingPongViolation):
        make_group([("a", hyperbolic_through(0.0, 1.0)),
                    ("b", hyperbolic_through(0.3, 1.0))])


def test_elliptic_generator_rejected():
    with pytest.raises(GeometryError):
        make_group([("r", rotation_at_i(1.0))])


def test_catalog_kinds(schottky, pair, cusp):
    assert schottky.kind == "Schottky"
    assert pair.kind == "GeometricallyFiniteFree"
    assert cusp.kind == "GeometricallyFiniteFree"
    assert schottky.rank == 2 and schottky.labels == ["a", "b"]


def test_schottky_product_joins_factors(schottky):
    left = make_group([("a", hyperbolic_through(0.0, 3.0))])
    right = make_group([("b", hyperbolic_through(HALF_PI, 3.0))])
    prod = schottky_product(left, right)
    assert prod.kind == "Schottky" and prod.labels == ["a", "b"]
    assert prod.word_matrix((1, -2)) == schottky.word_matrix((1, -2))
    moved = make_group([("b", hyperbolic_through(HALF_PI, 3.0))], HPoint(0.0, 2.0))
    with pytest.raises(GeometryError):
        schottky_product(left, moved)


def test_unknown_catalog_entry():
    with pytest.raises(ConfigError):
        build_group(GroupSection(catalog="nope"))
    with pytest.raises(ConfigError):
        build_group(GroupSection(catalog="schottky", params={"bogus": 1.0}))


# -------------------- enumeración -------------------- #
def test_cyclic_hyperbolic_orbit(cyclic):
    orbit = enumerate_orbit(cyclic, 10.5)
    assert len(orbit) == 11
    for p in orbit:
        assert p.dist == pytest.approx(2.0 * len(p.word), abs=1e-9)


@pytest.mark.parametrize("R, count", [(2.5, 1), (3.5, 5), (5.5, 13), (6.5, 17)])
def test_schottky_shell_counts(schottky, R, count):
    assert len(enumerate_orbit(schottky, R)) == count


def test_orbit_sorted_and_starts_at_identity(schottky):
    orbit = enumerate_orbit(schottky, 8.0)
    assert orbit[0].word == () and orbit[0].dist == 0.0
    dists = [p.dist for p in orbit]
    assert dists == sorted(dists)


def test_enumeration_matches_brute_force(schottky):
    orbit = enumerate_orbit(schottky, 8.0)
    got = {p.word: p.dist for p in orbit}
    brute = {}
    for w in _reduced_words(2, 6):
        d = hyp_distance(BASEPOINT, schottky.apply_word(w, BASEPOINT))
        if d <= 8.0:
            brute[w] = d
    assert set(got) == set(brute)
    for w, d in brute.items():
        assert got[w] == pytest.approx(d, abs=1e-9)


def test_threaded_enumeration_agrees(schottky):
    a = enumerate_orbit(schottky, 9.0)
    b = enumerate_orbit(schottky, 9.0, threads=3)
    assert [p.word for p in a] == [p.word for p in b]


def test_word_cap_raises_budget(schottky):
    with pytest.raises(BudgetExceeded):
        enumerate_orbit(schottky, 8.0, word_cap=10)


def test_free_group_has_no_collisions(schottky):
    assert collision_audit(schottky, enumerate_orbit(schottky, 8.0)) == []


# -------------------- exponentes -------------------- #
def test_cyclic_parabolic_exponent(parabolic):
    orbit = enumerate_orbit(parabolic, 12.0)
    est = estimate_exponent(orbit, (4.0, 12.0))
    assert est.value == pytest.approx(0.5, abs=0.05)
    assert est.count == len(orbit)
    assert est.ratio_max is not None
    gap = est.agreement()
    assert gap is not None and gap >= 0.0
    assert estimate_exponent(orbit, (4.0, 12.0), secondary=False).agreement() is None


def test_schottky_exponent_is_in_range(schottky):
    est = estimate_exponent(enumerate_orbit(schottky, 12.0), (6.0, 12.0))
    assert 0.0 < est.value < 1.0


def test_exponent_rejects_bad_window(cyclic):
    orbit = enumerate_orbit(cyclic, 10.5)
    with pytest.raises(ConfigError):
        estimate_exponent(orbit, (1.0, 5.0))
    with pytest.raises(InsufficientData):
        estimate_exponent(orbit, (4.0, 10.0))


def _power_law_distances():
    # d_k = 2 ln k: N(R) ≈ e^{R/2}
    return 2.0 * np.log(np.arange(1, 5000, dtype=float))


def test_shell_estimator_agrees_on_power_law():
    est = estimate_from_distances(_power_law_distances(), (4.0, 12.0))
    assert est.value == pytest.approx(0.5, abs=0.02)
    assert est.secondary is not None and math.isfinite(est.secondary)
    assert est.secondary == pytest.approx(0.5, abs=0.03)
    assert est.agreement() <= 0.03
    assert est.stderr > 0.0


def test_shell_counts_ignore_mass_below_window():
    d = _power_law_distances()
    est = estimate_from_shells(d[d > 8.0], (8.0, 16.0))
    assert est.value == pytest.approx(0.5, abs=0.03)
    assert est.count == int(np.count_nonzero((d > 8.0) & (d <= 16.0)))
    with pytest.raises(ConfigError):
        estimate_from_shells(d, (8.0, 8.5))
    with pytest.raises(InsufficientData):
        estimate_from_shells(d[:3], (8.0, 16.0))


@pytest.mark.slow
def test_schottky_estimators_agree(schottky):
    est = estimate_exponent(enumerate_orbit(schottky, 16.0), (6.0, 16.0))
    gap = est.agreement()
    assert gap is not None and gap <= 0.03


def test_length_spectrum_needs_classes():
    few = [ClosedGeodesic((1,), 5.0), ClosedGeodesic((2,), 5.5)]
    with pytest.raises(InsufficientData):
        length_spectrum_exponent(few, (4.0, 6.0))


# -------------------- reducción -------------------- #
def test_reduce_to_domain_recovers_word(schottky):
    q = HPoint(0.1, 1.1)
    word = (1, 2, 2, -1)
    p = schottky.apply_word(word, q)
    p_red, w = reduce_to_domain(schottky, p)
    back = schottky.apply_word(w, p_red)
    assert hyp_distance(back, p) < 1e-8
    assert w == word
    assert hyp_distance(p_red, q) < 1e-8


def test_orbit_distance_matches_brute_force(schottky, rng):
    orbit = enumerate_orbit(schottky, 8.0)
    imgs = np.array([p.image.z for p in orbit])
    pts = [flow(UnitTangent(BASEPOINT, float(rng.uniform(0, 2 * math.pi))),
                float(rng.uniform(0.0, 3.0))).base for _ in range(40)]
    z = np.array([p.z for p in pts])
    got = orbit_distance(schottky, z)
    for zi, g in zip(z, got):
        brute = 2.0 * np.arcsinh(np.abs(zi - imgs) / (2.0 * np.sqrt(zi.imag * imgs.imag)))
        assert g == pytest.approx(float(brute.min()), abs=1e-8)


# -------------------- geodésicas cerradas -------------------- #
def test_trace_three_generators(tr3_schottky):
    geos = closed_geodesics(tr3_schottky, 2.0)
    assert len(geos) == 4
    for g in geos:
        assert g.length0 == pytest.approx(2.0 * math.acosh(1.5), abs=1e-9)
    assert len(closed_geodesics(tr3_schottky, 2.0, invert_dedup=True)) == 2


def test_closed_geodesics_sorted_and_primitive(schottky):
    geos = closed_geodesics(schottky, 9.0)
    lengths = [g.length0 for g in geos]
    assert lengths == sorted(lengths)
    assert all(is_primitive(g.rep) for g in geos)
    assert len({g.rep for g in geos}) == len(geos)


# -------------------- Patterson -------------------- #
def test_patterson_weights(schottky):
    orbit = enumerate_orbit(schottky, 8.0)
    atoms = patterson_atoms(schottky, orbit, 1.0, delta_hat=0.5)
    assert atoms.total() == pytest.approx(1.0)
    assert atoms.weight_of(()) == pytest.approx(1.0 / np.exp(-atoms.dist).sum())
    assert atoms.weight_of((9,)) is None
    with pytest.raises(ConfigError):
        patterson_atoms(schottky, orbit, 0.92, delta_hat=0.9)
    with pytest.raises(ConfigError):
        patterson_atoms(schottky, orbit, 0.5, delta_hat=0.5, margin=0.0)
    with pytest.raises(TypeError):
        patterson_atoms(schottky, orbit, 1.0)  # type: ignore[call-arg]


def test_measure_arc_whole_and_complement(schottky):
    orbit = enumerate_orbit(schottky, 8.0)
    atoms = patterson_atoms(schottky, orbit, 1.0, delta_hat=0.5)
    assert measure_arc(atoms, BoundaryArc.whole(), 4.0) == pytest.approx(1.0)
    arc = BoundaryArc(BoundaryPoint.finite(-0.5), BoundaryPoint.finite(2.0))
    total = measure_arc(atoms, arc, 4.0) + measure_arc(atoms, arc.complement(), 4.0)
    assert total == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(EmptyTail):
        measure_arc(atoms, arc, 100.0)


def test_patterson_atoms_are_equivariant(schottky):
    orbit = enumerate_orbit(schottky, 9.0)
    x = schottky.apply_word((1,), schottky.basepoint)
    at_o = patterson_atoms(schottky, orbit, 1.0, delta_hat=0.5)
    at_x = patterson_atoms(schottky, orbit, 1.0, x, delta_hat=0.5)
    checked = 0
    for w in at_x.words:
        ref = at_o.weight_of(free_reduce((-1,) + w))
        if ref is None:
            continue
        # d(a·o, γo) = d(o, a⁻¹γo)
        assert at_x.weight_of(w) == pytest.approx(ref, rel=1e-9)
        checked += 1
    assert checked > 20


def test_patterson_change_of_point_is_conformal(schottky):
    orbit = enumerate_orbit(schottky, 10.0)
    o = schottky.basepoint
    x = schottky.apply_word((2,), o)
    s = 1.0
    at_o = patterson_atoms(schottky, orbit, s, delta_hat=0.5)
    at_x = patterson_atoms(schottky, orbit, s, x, delta_hat=0.5)
    far = np.flatnonzero(at_o.dist >= 8.0)
    assert far.size > 0
    angles = visual_angles_of_points(o, at_o.points[far])
    for i, ang in zip(far, angles):
        xi = ray_endpoint(o, float(ang))
        log_ratio = math.log(at_x.weights[i] / at_o.weights[i])
        assert log_ratio == pytest.approx(-s * busemann_exact(xi, x, o), abs=1e-2)
