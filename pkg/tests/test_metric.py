from __future__ import annotations
import math

import numpy as np
import pytest

from sprlab.core.errors import (
    ConfigError, CurvatureCertificateMissing, GeometryError, ShootingDivergence,
)
from sprlab.domain.hyperbolic import (
    BASEPOINT, HALF_PI, INFINITY, HPoint, UnitTangent, apply_mobius, axis_frame,
    busemann_exact, direction_to, flow, frame, hyp_distance,
)
from sprlab.domain.metric import (
    Bump, BumpField, ConformalMetric, axis_integral, busemann_approx, certify,
    closed_geodesic_length, flow_metric, geodesic_start, integrate_geodesic, metric_norm,
    metric_norm_derivative, perturbed_distance, profile, profile_prime, relaxed_distance,
)

PAIRS = [
    (HPoint(0.2, 0.8), HPoint(-0.5, 2.0)),
    (HPoint(-1.0, 1.0), HPoint(1.0, 1.0)),
    (HPoint(0.0, 0.4), HPoint(0.3, 2.5)),
]


# -------------------- perfil y bultos -------------------- #
def test_profile_values():
    assert profile(0.0) == pytest.approx(1.0)
    assert profile(0.5) == pytest.approx(0.5)
    assert profile(1.0) == 0.0
    assert profile(2.0) == 0.0
    assert profile_prime(0.5) == pytest.approx(-1.875)
    assert profile_prime(1.5) == 0.0


def test_profile_prime_matches_finite_difference():
    s = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    fd = (profile(s + h) - profile(s - h)) / (2 * h)
    assert np.allclose(profile_prime(s), fd, atol=1e-6)


def test_bump_field_values(bump):
    assert bump.at(BASEPOINT) == pytest.approx(1.0)
    assert bump.at(HPoint(0.0, math.exp(1.5))) == 0.0
    assert bump.sup_bound() == pytest.approx(1.0)
    assert BumpField.zero().is_zero
    with pytest.raises(GeometryError):
        Bump(BASEPOINT, 0.0, 1.0)


def test_bump_gradient_matches_finite_difference(bump):
    z = complex(0.3, 1.2)
    h = 1e-6
    _, gx, gy = bump.value_grad(z)
    fx = (bump.value(z + h)[0] - bump.value(z - h)[0]) / (2 * h)
    fy = (bump.value(z + 1j * h)[0] - bump.value(z - 1j * h)[0]) / (2 * h)
    assert gx[0] == pytest.approx(fx, abs=1e-6)
    assert gy[0] == pytest.approx(fy, abs=1e-6)


def test_periodized_field_is_invariant(schottky):
    phi = BumpField([Bump(BASEPOINT, 1.0, 1.0)], group=schottky, periodize=True)
    z = HPoint(0.2, 1.1)
    for w in [(1,), (2,), (-1, 2)]:
        assert phi.at(schottky.apply_word(w, z)) == pytest.approx(phi.at(z), abs=1e-9)


def test_periodize_requires_group():
    with pytest.raises(ConfigError):
        BumpField([Bump(BASEPOINT, 1.0, 1.0)], periodize=True)


# -------------------- certificado -------------------- #
def test_certificate_passes_for_small_eps(bump):
    cert = certify(bump, 0.02)
    assert cert.passed
    assert cert.pinching == pytest.approx(0.04)
    assert 0.0 < cert.a_eps < 1.0
    assert cert.max_laplacian > 0.0


def test_certificate_trivial_at_zero(bump):
    cert = certify(bump, 0.0)
    assert cert.passed and cert.a_eps == pytest.approx(1.0)


def test_certificate_fails_for_large_eps(bump):
    assert not certify(bump, 0.5).passed
    with pytest.raises(CurvatureCertificateMissing):
        ConformalMetric(bump, 0.5)


def test_metric_ids(bump):
    assert ConformalMetric.hyperbolic().metric_id == "g0"
    assert ConformalMetric(bump, 0.02).metric_id == "eps+0.0200"
    assert ConformalMetric(bump, 0.0).is_flat


def test_metric_norm_and_derivative(bump):
    v = UnitTangent(BASEPOINT, 0.3)
    m = ConformalMetric(bump, 0.02)
    assert metric_norm(m, v) == pytest.approx(math.exp(0.02))
    assert metric_norm_derivative(m, v) == pytest.approx(1.0)


# -------------------- EDO -------------------- #
def test_flat_ode_matches_closed_form_vertical():
    v = UnitTangent(BASEPOINT, HALF_PI)
    path = integrate_geodesic(ConformalMetric.hyperbolic(), v, 20.0, sample_step=0.5)
    for t, p, _ in path.samples:
        assert hyp_distance(p, flow(v, t).base) < 1e-6
    assert path.length == 20.0


def test_flat_ode_matches_closed_form_oblique():
    v = UnitTangent(HPoint(0.3, 1.2), 0.9)
    path = integrate_geodesic(ConformalMetric.hyperbolic(), v, 5.0)
    for t, p, _ in path.samples:
        assert hyp_distance(p, flow(v, t).base) < 1e-6


def test_ode_horizon_enforced():
    with pytest.raises(ConfigError):
        integrate_geodesic(ConformalMetric.hyperbolic(), UnitTangent(BASEPOINT, 0.0), 150.0)


def test_flow_metric_flat_is_exact_flow():
    v = UnitTangent(HPoint(0.1, 0.9), 2.0)
    for t in (-3.0, 0.0, 4.0):
        w = flow_metric(ConformalMetric.hyperbolic(), v, t)
        u = flow(v, t)
        assert hyp_distance(w.base, u.base) < 1e-12
        assert math.cos(w.angle - u.angle) > 1.0 - 1e-12


def test_flow_metric_backwards_inverts(bump):
    m = ConformalMetric(bump, 0.02)
    v = UnitTangent(HPoint(0.2, 0.9), 1.0)
    w = flow_metric(m, flow_metric(m, v, 2.0), -2.0)
    assert hyp_distance(v.base, w.base) < 1e-6


# -------------------- distancias -------------------- #
def test_flat_distance_is_hyperbolic():
    m = ConformalMetric.hyperbolic()
    for x, y in PAIRS:
        assert perturbed_distance(m, x, y) == hyp_distance(x, y)
        assert relaxed_distance(m, x, y) == hyp_distance(x, y)


@pytest.mark.parametrize("x, y", PAIRS)
def test_perturbed_distance_sandwich(bump, x, y):
    m = ConformalMetric(bump, 0.02)
    d0 = hyp_distance(x, y)
    d = perturbed_distance(m, x, y)
    E = m.pinching
    assert math.exp(-E) * d0 - 1e-6 <= d <= math.exp(E) * d0 + 1e-6
    # φ ≥ 0 y ε > 0: nada se acorta
    assert d >= d0 - 1e-6


@pytest.mark.parametrize("x, y", PAIRS)
def test_relaxed_distance_bounds(bump, x, y):
    m = ConformalMetric(bump, 0.02)
    d0 = hyp_distance(x, y)
    r = relaxed_distance(m, x, y)
    assert d0 - 1e-9 <= r <= math.exp(0.02) * d0 + 1e-9
    assert r == pytest.approx(perturbed_distance(m, x, y), abs=5e-3)


def test_first_variation_of_closed_length(schottky):
    phi = BumpField([Bump(BASEPOINT, 1.0, 1.0)], group=schottky, periodize=True)
    eps = 0.01
    up = closed_geodesic_length(ConformalMetric(phi, eps), schottky, (1,))
    down = closed_geodesic_length(ConformalMetric(phi, -eps), schottky, (1,))
    slope = (up - down) / (2 * eps)
    assert slope == pytest.approx(axis_integral(phi, schottky, (1,)), rel=0.03)


def test_bump_far_from_axis_leaves_length_unchanged(schottky):
    center = flow(UnitTangent(BASEPOINT, HALF_PI), 4.0).base
    w = apply_mobius(axis_frame(schottky.word_matrix((1,))).inverse(), center)
    assert math.asinh(abs(w.x) / w.y) > 2.0
    phi = BumpField([Bump(center, 1.0, 1.0)])
    flat = closed_geodesic_length(ConformalMetric.hyperbolic(), schottky, (1,))
    bent = closed_geodesic_length(ConformalMetric(phi, 0.02), schottky, (1,))
    assert bent == pytest.approx(flat, abs=1e-6)


def test_axis_integral_zero_field(schottky):
    assert axis_integral(BumpField.zero(), schottky, (1, 2)) == 0.0
    with pytest.raises(GeometryError):
        axis_integral(BumpField.zero(), schottky, ())


# -------------------- Busemann -------------------- #
def test_busemann_approx_flat_within_bound():
    m = ConformalMetric.hyperbolic()
    x, y = BASEPOINT, HPoint(0.5, 2.0)
    b = busemann_approx(m, INFINITY, x, y, 30.0)
    assert abs(b.value - busemann_exact(INFINITY, x, y)) <= b.bound + 1e-12


def test_busemann_approx_horizon_check():
    with pytest.raises(ConfigError):
        busemann_approx(ConformalMetric.hyperbolic(), INFINITY, BASEPOINT,
                        HPoint(0.5, 2.0), 1.0)


def test_flat_busemann_error_decays_exponentially():
    m = ConformalMetric.hyperbolic()
    x, y = BASEPOINT, HPoint(0.5, 2.0)
    exact = busemann_exact(INFINITY, x, y)
    ts = np.arange(4.0, 10.0)
    errs = [abs(busemann_approx(m, INFINITY, x, y, float(t)).value - exact) for t in ts]
    slope = np.polyfit(ts, np.log(errs), 1)[0]
    assert slope <= -0.9


def test_perturbed_busemann_stable_under_doubling(bump):
    m = ConformalMetric(bump, 0.02)
    x, y = BASEPOINT, HPoint(0.5, 2.0)
    near = busemann_approx(m, INFINITY, x, y, 4.0)
    far = busemann_approx(m, INFINITY, x, y, 8.0)
    assert abs(near.value - far.value) <= near.bound
    assert far.bound < near.bound


def _distance_to_line(x: HPoint, y: HPoint, p: HPoint) -> float:
    w = apply_mobius(frame(UnitTangent(x, direction_to(x, y))).inverse(), p)
    return math.asinh(abs(w.x) / w.y)


def test_perturbed_geodesics_stay_near_flat_ones(bump, rng):
    m = ConformalMetric(bump, 0.03)
    checked = 0
    for _ in range(10):
        a, b = rng.uniform(0.0, 2.0 * math.pi, size=2)
        r1, r2 = rng.uniform(0.3, 2.0, size=2)
        x = flow(UnitTangent(BASEPOINT, float(a)), float(r1)).base
        y = flow(UnitTangent(BASEPOINT, float(b)), float(r2)).base
        d0 = hyp_distance(x, y)
        if d0 < 0.5:
            continue
        start, L = geodesic_start(m, x, y)
        path = integrate_geodesic(m, start, L)
        worst = max(_distance_to_line(x, y, p) for _, p, _ in path.samples)
        assert worst <= math.sqrt(m.pinching) * d0
        assert hyp_distance(path.end().base, y) < 1e-5
        checked += 1
    assert checked >= 5


def test_shooting_falls_back_to_bisection(bump, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("sin convergencia")

    monkeypatch.setattr("sprlab.domain.metric.newton", broken)
    m = ConformalMetric(bump, 0.03)
    E = m.pinching
    for x, y in PAIRS:
        d0 = hyp_distance(x, y)
        d = perturbed_distance(m, x, y)
        assert math.exp(-E) * d0 - 1e-6 <= d <= math.exp(E) * d0 + 1e-6


def test_shooting_reports_divergence_when_every_bracket_fails(bump, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("sin convergencia")

    monkeypatch.setattr("sprlab.domain.metric.newton", broken)
    monkeypatch.setattr("sprlab.domain.metric.brentq", broken)
    x, y = PAIRS[0]
    with pytest.raises(ShootingDivergence):
        perturbed_distance(ConformalMetric(bump, 0.03), x, y)
