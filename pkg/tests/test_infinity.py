from __future__ import annotations

import numpy as np
import pytest

from sprlab.core.errors import ConfigError, EmptyTail, GeometryError
from sprlab.domain.catalog import cusp_product
from sprlab.domain.group import enumerate_orbit, estimate_exponent, invert_word, patterson_atoms
from sprlab.domain.infinity import (
    CompactWindow, delta_infinity, delta_out, excursion_mass, excursion_records,
    is_outside_excursion, spr_verdict, tail_records,
)


def test_compact_window_validation(schottky):
    with pytest.raises(GeometryError):
        CompactWindow(0.0)
    with pytest.raises(GeometryError):
        CompactWindow.for_group(schottky, 1.0)
    assert CompactWindow.for_group(schottky, 4.0).R_W == 4.0


def test_short_words_are_trivially_out(schottky):
    W = CompactWindow.for_group(schottky, 4.0)
    ident = is_outside_excursion(schottky, (), W)
    assert ident.is_out and ident.dist == 0.0
    rec = is_outside_excursion(schottky, (1,), W)
    assert rec.is_out
    assert rec.first_exit == pytest.approx(3.0)


def test_axis_power_returns_to_window(cyclic):
    W = CompactWindow.for_group(cyclic, 1.5)
    rec = is_outside_excursion(cyclic, (1,) * 5, W)
    assert not rec.is_out
    assert rec.first_exit == pytest.approx(1.5)
    assert rec.first_exit < rec.first_return <= rec.last_entry


def test_excursion_symmetric_under_inversion(schottky):
    W = CompactWindow.for_group(schottky, 2.0)
    for w in [(1, 2), (1, 2, -1), (2, 2, 1), (1, 1, 2, 2), (-2, 1, 1)]:
        a = is_outside_excursion(schottky, w, W)
        b = is_outside_excursion(schottky, invert_word(w), W)
        assert a.is_out == b.is_out
        assert a.dist == pytest.approx(b.dist, abs=1e-9)


def test_step_must_be_fine(schottky):
    W = CompactWindow.for_group(schottky, 4.0)
    with pytest.raises(ConfigError):
        excursion_records(schottky, enumerate_orbit(schottky, 5.0), W, step=0.5)


def test_convex_cocompact_has_no_entropy_at_infinity(schottky):
    orbit = enumerate_orbit(schottky, 12.0)
    W = CompactWindow.for_group(schottky, 4.0)
    est = delta_out(schottky, orbit, W, (6.0, 12.0), min_excursions=30)
    assert est.value == 0.0


def test_schottky_ladder_is_spr(schottky):
    orbit = enumerate_orbit(schottky, 14.0)
    ladder = [CompactWindow.for_group(schottky, r) for r in (3.0, 4.0, 5.0)]
    report = spr_verdict(schottky, orbit, ladder, (6.0, 14.0))
    assert [est.value for _, est in report.delta_out_ladder] == [0.0, 0.0, 0.0]
    assert report.delta_infinity == 0.0
    assert report.verdict == "SPR"


def test_ladder_must_increase(schottky):
    orbit = enumerate_orbit(schottky, 12.0)
    ladder = [CompactWindow(4.0), CompactWindow(5.0)]
    with pytest.raises(ConfigError):
        delta_infinity(schottky, orbit, ladder, (6.0, 12.0))


def test_cyclic_group_is_not_spr(cyclic):
    orbit = enumerate_orbit(cyclic, 100.0)
    ladder = [CompactWindow.for_group(cyclic, r) for r in (3.0, 4.0, 5.0)]
    report = spr_verdict(cyclic, orbit, ladder, (50.0, 100.0), grid_step=0.5,
                         min_points=20, min_excursions=10)
    assert report.verdict == "NOT_SPR"
    assert not report.is_spr
    assert report.delta_full.value < 0.05
    assert [r for r, _ in report.delta_out_ladder] == [3.0, 4.0, 5.0]


def test_excursion_mass_is_monotone(schottky):
    orbit = enumerate_orbit(schottky, 12.0)
    atoms = patterson_atoms(schottky, orbit, 1.0, delta_hat=0.5)
    W = CompactWindow.for_group(schottky, 4.0)
    recs = tail_records(schottky, atoms, W, R_far=8.0)
    masses = [excursion_mass(schottky, atoms, W, T, R_far=8.0, records=recs)
              for T in (0.0, 2.0, 4.0, 6.0)]
    # la salida de W̃ ocurre en R_W: antes no hay retorno posible
    assert masses[:3] == pytest.approx([1.0, 1.0, 1.0])
    assert masses[3] < 1.0
    assert all(b <= a + 1e-15 for a, b in zip(masses, masses[1:]))
    with pytest.raises(EmptyTail):
        excursion_mass(schottky, atoms, W, 1.0, R_far=100.0)


@pytest.mark.slow
def test_parabolic_pair_has_gap_at_infinity(pair):
    orbit = enumerate_orbit(pair, 16.0)
    ladder = [CompactWindow.for_group(pair, r) for r in (3.0, 4.0, 5.0)]
    report = spr_verdict(pair, orbit, ladder, (6.0, 16.0))
    assert report.delta_full.value > report.delta_infinity
    assert report.delta_infinity == pytest.approx(0.5, abs=0.15)
    assert report.verdict == "SPR"


@pytest.mark.slow
def test_long_excursion_mass_decays(cusp):
    orbit = enumerate_orbit(cusp, 15.0)
    delta = estimate_exponent(orbit, (6.0, 15.0)).value
    W = CompactWindow.for_group(cusp, 4.0)
    d_out = delta_out(cusp, orbit, W, (6.0, 15.0)).value
    atoms = patterson_atoms(cusp, orbit, delta + 0.1, delta_hat=delta)
    recs = tail_records(cusp, atoms, W, R_far=11.0)
    Ts = np.array([5.0, 6.0, 7.0, 8.0])
    masses = np.array([excursion_mass(cusp, atoms, W, float(T), R_far=11.0, records=recs)
                       for T in Ts])
    assert np.all(masses > 0.0)
    slope = np.polyfit(Ts, np.log(masses), 1)[0]
    assert slope <= -(delta - d_out - 0.1)


@pytest.mark.slow
def test_free_product_of_cusps_keeps_largest_exponent_at_infinity():
    group = cusp_product()
    orbit = enumerate_orbit(group, 14.0)
    ladder = [CompactWindow.for_group(group, r) for r in (3.0, 4.0, 5.0)]
    report = spr_verdict(group, orbit, ladder, (6.0, 14.0))
    # cada factor aporta una cúspide de exponente 1/2
    assert report.delta_infinity == pytest.approx(0.5, abs=0.15)
    assert report.delta_full.value > report.delta_infinity
