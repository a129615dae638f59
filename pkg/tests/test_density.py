import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ntalab import cones, density, wos
from ntalab.geometry import VertexError, halfspace, hong_cone, kp_cone
from ntalab.wos import WalkConfig, WalkError


def disc_measure(h, rho):
    return 1 - h / math.sqrt(h * h + rho * rho)


def test_halfspace_kernel_finite_pole():
    cfg = WalkConfig(walks=200_000, seed=1)
    est = density.poisson_kernel_estimate(halfspace(3), np.array([0, 0, 1.0]), np.zeros(3), [0.4, 0.2, 0.1], cfg)
    for e in est:
        exact = disc_measure(1, e.radius) / (math.pi * e.radius ** 2)
        assert abs(e.value - exact) <= 3 * e.std_error + 0.01 * exact
    assert est[-1].value == pytest.approx(1 / (2 * math.pi), rel=0.1)


def test_halfspace_kernel_infinity_is_one():
    est, exact = density.poisson_kernel_estimate(halfspace(3), "infinity", np.zeros(3), [1.0, 0.1])
    assert exact == 1.0
    assert all(e.value == pytest.approx(1.0, rel=0.01) for e in est)


def test_hong_kernel_infinity(profile):
    xi = np.array([math.cos(profile.theta0), 0, math.sin(profile.theta0), 0])
    est, exact = density.poisson_kernel_estimate(hong_cone(), "infinity", xi, [0.1, 0.05, 0.02], profile=profile)
    assert exact == pytest.approx(1.0, abs=1e-12)
    vals = [e.value for e in est]
    assert abs(vals[-1] - 1) < abs(vals[0] - 1) and abs(vals[-1] - 1) <= 0.02


def test_kernel_needs_smooth_point():
    with pytest.raises(VertexError):
        density.poisson_kernel_estimate(kp_cone(), "infinity", np.zeros(4), [0.1])


def test_null_set_ratio_zero():
    cloud = wos.hit_cloud(halfspace(3), np.array([0, 0, 1.0]), WalkConfig(walks=100))
    assert density.set_kernel_ratio(cloud, lambda z: np.ones(len(z), bool), 0.0, 100) == 0.0


def test_oscillation_constant_field_zero():
    f = density.BoundaryField("const", kp_cone(), lambda z: np.full(len(z), 3.0))
    assert density.oscillation(f, np.zeros(4), 1.0) == 0.0


def test_halfspace_normal_oscillation_zero():
    d = halfspace(3)
    assert density.oscillation(density.normal_field(d), np.array([2.0, -1, 0]), 0.7) == 0.0


def test_kp_oscillation_scale_invariant():
    f = density.normal_field(kp_cone())
    a = density.oscillation(f, np.zeros(4), 1.0, 3000, 1)
    b = density.oscillation(f, np.zeros(4), 100.0, 3000, 1)
    assert a > 0.5 and a == pytest.approx(b, rel=0.02)


@given(st.floats(-5, 5), st.floats(0.1, 5))
def test_oscillation_shift_and_scale(shift, scale):
    d = hong_cone()
    base = density.normal_field(d)
    moved = density.BoundaryField("m", d, lambda z: scale * base(z) + shift)
    a = density.oscillation(base, np.zeros(4), 1.0, 800, 2)
    b = density.oscillation(moved, np.zeros(4), 1.0, 800, 2)
    assert b == pytest.approx(scale * a, rel=1e-9)


def test_vmo_profile_halfspace_zero(tmp_path):
    d = halfspace(3)
    prof = density.vmo_profile(d, density.normal_field(d), [8.0, 1.0, 0.125], 4, samples=500)
    assert np.all(prof.sup_oscillation == 0)
    prof.to_csv(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().startswith("scale,sup_oscillation,centers")


def test_vmo_profile_hong_not_vmo():
    d = hong_cone()
    scales = [2.0 ** -k for k in range(7)]
    prof = density.vmo_profile(d, density.normal_field(d), scales, 3, samples=1500)
    assert np.min(prof.sup_oscillation) > 0.5


def test_vmo_profile_hong_log_h(profile):
    d = hong_cone()
    sol = cones.explicit_solution(d, profile)
    fld = density.log_field(d, lambda z: np.linalg.norm(sol.gradient(z - 1e-9 * d.outer_normal(z, check_vertex=False)),
                                                        axis=1))
    prof = density.vmo_profile(d, fld, [1.0, 0.125, 1 / 64], 3, samples=800)
    assert np.max(prof.sup_oscillation) <= 1e-6


def test_vmo_scales_must_decrease():
    d = halfspace(3)
    with pytest.raises(ValueError):
        density.vmo_profile(d, density.normal_field(d), [1.0, 2.0])


def test_doubling_errors():
    with pytest.raises(WalkError):
        density.doubling_ratio(halfspace(3), [0, 0, 1.0], np.zeros(3), 1.0)
    with pytest.raises(WalkError):
        density.doubling_ratio(halfspace(3), [0, 0, 10.0], np.zeros(3), 1e-3, WalkConfig(walks=10))


def test_ainfty_half_ball():
    cfg = WalkConfig(walks=200_000, seed=3)
    rep = density.ainfty_ratio_check(halfspace(3), [0, 0, 2.0], np.zeros(3), 1.0,
                                     wos.ball_indicator(np.zeros(3), 0.5), 0.1, cfg)
    exact = disc_measure(2, 0.5) / disc_measure(2, 1.0)
    assert rep.passed and rep.mid == pytest.approx(exact, rel=0.03)


def test_ainfty_full_ball():
    rep = density.ainfty_ratio_check(halfspace(3), [0, 0, 2.0], np.zeros(3), 1.0,
                                     lambda z: np.ones(len(z), bool), 0.1, WalkConfig(walks=20_000))
    assert rep.sigma_ratio == 1.0 and rep.mid == 1.0 and rep.passed


def test_ainfty_hong_annulus(profile):
    d = hong_cone()
    xi = np.array([math.cos(profile.theta0), 0, math.sin(profile.theta0), 0])
    pole = xi - 2.0 * d.outer_normal(xi)[0]
    r_in = 0.5 * 0.9 ** (1 / 3)  # sigma(annulus) / sigma(ball) ≈ 0.1 for a 3-dimensional boundary
    ann = lambda z: np.linalg.norm(np.atleast_2d(z) - xi, axis=1) > r_in
    rep = density.ainfty_ratio_check(d, pole, xi, 0.5, ann, 0.25, WalkConfig(walks=100_000, seed=4), constant=4.0)
    assert rep.sigma_ratio == pytest.approx(0.1, abs=0.03)
    assert rep.passed


def test_pole_orbit():
    orbit = density.pole_orbit([10.0, 0, 0, 0], 4)
    assert np.allclose(orbit, [[10, 0, 0, 0], [0, 10, 0, 0], [-10, 0, 0, 0], [0, -10, 0, 0]], atol=1e-12)


def test_finite_pole_ratios_halfspace():
    # with a far pole the normalized kernel ratios on the half-space equal 1 up to O(1/|p|)
    d = halfspace(3)
    trace = density.finite_pole_kernel_ratios(d, np.zeros(3), [0.5, 0.25], np.array([0, 0, 20.0]),
                                              np.array([0, 0, 1.0]), WalkConfig(walks=20_000, seed=5))
    assert abs(trace.extrapolated - 1) <= 0.1
