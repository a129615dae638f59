import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ntalab import blowup, cones
from ntalab.geometry import best_plane, halfspace, hong_cone, perturbed_graph
from ntalab.wos import WalkConfig, WalkError

INF = blowup.INFINITY


def x3_plus(scale=1.0):
    return lambda z: scale * np.maximum(np.atleast_2d(z)[:, -1], 0.0)


def smooth_hong_point(profile):
    return np.array([math.cos(profile.theta0), 0, math.sin(profile.theta0), 0])


def test_rescale_halfspace_identity():
    d = halfspace(3)
    r = blowup.rescale_domain(d, np.array([3.0, -1.0, 0]), 0.01)
    x = np.random.default_rng(0).normal(size=(20, 3))
    assert np.allclose(r.signed_distance(x), d.signed_distance(x))


def test_rescale_cone_vertex_identity():
    d = hong_cone()
    x = np.random.default_rng(1).normal(size=(20, 4))
    for r in (0.25, 4.0):
        assert np.allclose(blowup.rescale_domain(d, np.zeros(4), r).signed_distance(x), d.signed_distance(x))


def test_rescale_smooth_point_flattens(profile):
    xi = smooth_hong_point(profile)
    thetas = [best_plane(blowup.rescale_domain(hong_cone(), xi, 2.0 ** -k), np.zeros(4), 1.0, count=1500).theta
              for k in (1, 3, 5)]
    assert thetas[0] > thetas[1] > thetas[2] and thetas[2] < 0.05


def test_rescale_spec_separation():
    spec = blowup.RescaleSpec([np.zeros(3)] * 2, [0.1, 0.05], [np.array([0, 0, 1.0])] * 2)
    assert np.allclose(spec.separations, [10, 20])
    with pytest.raises(ValueError):
        blowup.RescaleSpec([np.zeros(3)] * 3, [0.5, 0.25, 0.4], [np.array([0, 0, 1.0])] * 3)
    far = blowup.RescaleSpec([np.zeros(3)], [2.0], [INF])
    assert far.separations[0] == math.inf


def test_rescaled_u_halfspace_far_pole():
    # images and the disc formula give 1.018 at separation 10; the limit is x3+ = 1
    val = blowup.rescaled_u(halfspace(3), np.array([0, 0, 1.0]), np.zeros(3), 1.0, np.array([0, 0, 10.0]),
                            WalkConfig(walks=200_000, seed=2))
    assert val == pytest.approx(1.0, rel=0.05)


def test_rescaled_u_outside_is_zero():
    assert blowup.rescaled_u(halfspace(3), np.array([0, 0, -1.0]), np.zeros(3), 1.0, INF) == 0.0


def test_rescaled_u_separation_enforced():
    with pytest.raises(WalkError):
        blowup.rescaled_u(halfspace(3), np.array([0, 0, 1.0]), np.zeros(3), 1.0, np.array([0, 0, 3.0]))


def test_rescaled_u_hong_vertex_fixed_point(profile):
    x = np.array([0.7, 0.1, 0.2, 0.05])
    v = cones.hong_value(profile, x)[0]
    for r in (0.1, 1.0, 10.0):
        assert blowup.rescaled_u(hong_cone(), x, np.zeros(4), r, INF, profile=profile) == pytest.approx(v, rel=1e-6)


def test_rescaled_kernel_hong_vertex(profile):
    xi = smooth_hong_point(profile)
    for r in (0.5, 2.0):
        h = blowup.rescaled_kernel(hong_cone(), xi, np.zeros(4), r, INF, profile=profile)
        assert h.value == pytest.approx(1.0, abs=1e-6)


def test_rescaled_kernel_halfspace_tends_to_one():
    means = blowup.rescaled_kernel_means(halfspace(3), np.zeros(3), [0.1, 0.05], np.array([0, 0, 1.0]),
                                         WalkConfig(walks=1_000_000, seed=3), points=16)
    assert all(abs(m.mean - 1) <= 0.1 for m in means)


def test_kernel_means_hong_at_least_one(profile):
    means = blowup.rescaled_kernel_means(hong_cone(), smooth_hong_point(profile), [0.1, 0.01], INF, points=8,
                                         profile=profile)
    assert all(m.mean >= 1 - 1e-6 for m in means)


def test_theta_traces(profile):
    d = hong_cone()
    smooth = blowup.theta_trace(d, smooth_hong_point(profile), [0.4, 0.2, 0.1, 0.05], 2000)
    assert blowup.loglog_slope(smooth) == pytest.approx(1.0, abs=0.2)
    vt = [t for _, t in blowup.blowdown_theta_trace(d, np.zeros(4), [0.5, 1.0, 2.0, 4.0], 2000)]
    assert max(vt) - min(vt) <= 0.02 * np.mean(vt)


def test_blowdown_halfspace_zero():
    assert all(t <= 1e-9 for _, t in blowup.blowdown_theta_trace(halfspace(3), np.zeros(3), [1, 4, 16], 1000))


def test_blowdown_perturbed_decays():
    d = perturbed_graph(3, 0.1, 1.0)
    x = d.project(np.zeros(3))[0]
    trace = blowup.blowdown_theta_trace(d, x, [4.0, 8.0, 16.0, 32.0], 2000)
    thetas = [t for _, t in trace]
    assert all(b < a for a, b in zip(thetas, thetas[1:]))
    assert blowup.loglog_slope(trace) == pytest.approx(-1.0, abs=0.25)


def test_blowdown_radii_increasing():
    with pytest.raises(ValueError):
        blowup.blowdown_theta_trace(halfspace(3), np.zeros(3), [2.0, 1.0])


def test_flatness_class_exact():
    res = blowup.flatness_class_check(x3_plus(), np.zeros(3), 1.0, np.array([0, 0, -1.0]), 0.05, 0.05)
    assert res.passed and res.witness is None


@pytest.mark.parametrize("gamma, sigma, expected", [(0.05, 0.1, True), (0.2, 0.1, False)])
def test_flatness_class_tilt(gamma, sigma, expected):
    nu = -np.array([math.sin(gamma), 0, math.cos(gamma)])
    res = blowup.flatness_class_check(x3_plus(), np.zeros(3), 1.0, nu, sigma, sigma)
    assert res.passed is expected
    if not expected:
        assert res.witness is not None


def test_flatness_class_implies_beta():
    # pass at (σ, σ) bounds the best-plane β of the zero set
    sigma = 0.1
    nu = -np.array([math.sin(0.05), 0, math.cos(0.05)])
    assert blowup.flatness_class_check(x3_plus(), np.zeros(3), 1.0, nu, sigma, sigma).passed
    rep = best_plane(halfspace(3), np.zeros(3), 1.0)
    assert rep.beta <= sigma + rep.max_gap_bound


def test_ac_functional():
    vals = [blowup.ac_functional(x3_plus(), np.zeros(3), 1.0, h) for h in (1 / 16, 1 / 32, 1 / 64)]
    assert vals[-1] == pytest.approx(4 * math.pi / 3, rel=0.02)
    errs = [abs(v - 4 * math.pi / 3) for v in vals]
    assert errs[0] > errs[1] > errs[2]
    assert abs(vals[1] - vals[2]) <= 2 * (1 / 32)
    assert blowup.ac_functional(lambda z: np.zeros(len(np.atleast_2d(z))), np.zeros(3), 1.0, 1 / 16) == 0.0
    with pytest.raises(ValueError):
        blowup.ac_functional(x3_plus(), np.zeros(3), 1.0, 0.1)


def test_fd_gradient():
    g = blowup.fd_gradient(lambda z: np.sum(np.atleast_2d(z) ** 2, axis=1), np.array([[0.3, 0.2, 1.0]]), 1e-4)
    assert np.allclose(g, [[0.6, 0.4, 2.0]], atol=1e-6)


def test_first_variation_tangential_and_normal():
    u = x3_plus()
    c = np.zeros(3)
    for direction in ([1.0, 0, 0], [0, 0, 1.0]):
        phi = blowup.bump_field(np.array([0, 0, 0.304]), 0.4, np.array(direction))
        sweep = blowup.refinement_sweep(lambda h: blowup.first_variation_residual(u, phi, c, 1.0, h),
                                        [1 / 16, 1 / 32, 1 / 64])
        assert abs(sweep[-1][1]) < abs(sweep[0][1]) or abs(sweep[-1][1]) <= 1e-10


def test_first_variation_counterfeit():
    phi = blowup.bump_field(np.array([0, 0, 0.304]), 0.4, np.array([0, 0, 1.0]))
    vals = [blowup.first_variation_residual(x3_plus(2.0), phi, np.zeros(3), 1.0, h) for h in (1 / 16, 1 / 32, 1 / 64)]
    assert min(abs(v) for v in vals) > 5e-3


def test_first_variation_linear_in_field():
    u = x3_plus()
    a = blowup.bump_field(np.array([0.1, 0, 0.3]), 0.35, np.array([0, 0, 1.0]))
    b = blowup.bump_field(np.array([-0.1, 0.1, 0.2]), 0.3, np.array([1.0, 0, 0.5]))
    h = 1 / 32
    fv = lambda phi: blowup.first_variation_residual(u, phi, np.zeros(3), 1.0, h)
    assert fv(a * 2.0) == pytest.approx(2 * fv(a), rel=1e-10, abs=1e-14)
    assert fv(a + b) == pytest.approx(fv(a) + fv(b), rel=1e-10, abs=1e-14)


def test_first_variation_support_check():
    phi = blowup.bump_field(np.array([0, 0, 0.9]), 0.4, np.array([0, 0, 1.0]))
    with pytest.raises(ValueError):
        blowup.first_variation_residual(x3_plus(), phi, np.zeros(3), 1.0, 1 / 16)


def test_sphere_average():
    vals = blowup.sphere_average_check(x3_plus(), np.zeros(3), [0.5, 1.0, 3.0])
    assert all(v == pytest.approx(math.pi, rel=1e-10) for _, v in vals)
    zero = blowup.sphere_average_check(lambda z: np.zeros(len(np.atleast_2d(z))), np.zeros(3), [1.0])
    assert zero[0][1] == 0.0


def test_sphere_average_hong_vertex(profile):
    u = lambda z: cones.hong_value(profile, z)
    vals = [v for _, v in blowup.sphere_average_check(u, np.zeros(4), [0.5, 1.0, 2.0])]
    assert min(vals) > 0
    assert np.allclose(vals, vals[0], rtol=1e-9)


@given(st.floats(0.1, 50))
def test_hong_blowdown_homogeneous(profile, R):
    x = np.random.default_rng(4).normal(size=(20, 4))
    assert np.allclose(cones.hong_value(profile, R * x) / R, cones.hong_value(profile, x), rtol=1e-12, atol=1e-14)


def test_gauss_green_halfspace():
    zeta = blowup.TensorBump(np.zeros(3), 0.5)
    res = [abs(blowup.gauss_green_residual(halfspace(3), zeta, h)) for h in (1 / 16, 1 / 32)]
    assert res[1] <= 1e-3


def test_gauss_green_interior_support():
    zeta = blowup.TensorBump(np.array([0, 0, 2.0]), 0.5)
    assert abs(blowup.gauss_green_residual(halfspace(3), zeta, 1 / 16)) <= 1e-12


def test_gauss_green_hong(profile):
    zeta = blowup.TensorBump(smooth_hong_point(profile), 0.2)
    res = [abs(blowup.gauss_green_residual(hong_cone(), zeta, h, profile=profile)) for h in (0.05, 0.025)]
    assert res[1] <= 1e-3


def test_normal_vmo_blowup_integral(profile):
    hs = [halfspace(3)] * 3
    assert blowup.normal_vmo_blowup_integral(hs, samples=500) == [0.0, 0.0, 0.0]
    graphs = [perturbed_graph(3, a, 1.0) for a in (0.2, 0.1, 0.05)]
    vals = blowup.normal_vmo_blowup_integral(graphs, samples=2000)
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[1] / vals[2] == pytest.approx(4, rel=0.2)
    cone = [blowup.rescale_domain(hong_cone(), np.zeros(4), r) for r in (0.5, 1.0, 2.0)]
    cv = blowup.normal_vmo_blowup_integral(cone, samples=2000)
    assert min(cv) > 0 and np.allclose(cv, cv[0], rtol=0.02)


def test_variational_report(tmp_path):
    phi = blowup.bump_field(np.array([0, 0, 0.304]), 0.4, np.array([0, 0, 1.0]), "normal")
    rep = blowup.variational_report(x3_plus(), np.zeros(3), 1.0, 1 / 32, [phi])
    path = tmp_path / "v.json"
    rep.to_json(path)
    data = json.loads(path.read_text())
    assert data["functional_value"] == pytest.approx(4 * math.pi / 3, rel=0.02)


def test_convergence_order_and_csv(tmp_path):
    sweep = [(h, 3 * h) for h in (0.1, 0.05, 0.025)]
    assert blowup.convergence_order(sweep) == pytest.approx(1.0)
    blowup.sweep_to_csv(sweep, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "h,value"
