import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from ntalab import potential
from ntalab.geometry import VertexError, halfspace, hong_cone, kp_cone
from ntalab.potential import ApproachSpec, PotentialError, RieszKernel
from ntalab.wos import EmpiricalMeasure


def atom(points, weights=None):
    points = np.atleast_2d(np.asarray(points, float))
    w = np.ones(len(points)) if weights is None else np.asarray(weights, float)
    return EmpiricalMeasure(points, w, "surface")


def test_kernel_is_gradient_of_fundamental_solution():
    from ntalab.wos import fundamental_solution

    x = np.array([0.3, -0.4, 1.1])
    h = 1e-6
    grad = np.array([(fundamental_solution(x + h * e)[0] - fundamental_solution(x - h * e)[0]) / (2 * h)
                     for e in np.eye(3)])
    assert np.allclose(RieszKernel(2)(x)[0], grad, rtol=1e-6)


def test_riesz_difference_single_atom():
    k = RieszKernel(2)
    val = potential.riesz_difference(atom([0, 0, 0]), [0, 0, 1.0], [0, 0, 2.0])
    assert np.allclose(val, k.c * np.array([0, 0, 1 - 1 / 4]))


def test_riesz_difference_symmetric_measure():
    pts = np.array([[1.0, 0.5, 0], [-1.0, -0.5, 0], [0.2, 1.0, 0.3], [-0.2, -1.0, -0.3]])
    x = np.array([0.4, 0.1, 2.0])
    val = potential.riesz_difference(atom(pts), x, -x)
    flipped = potential.riesz_difference(atom(-pts), -x, x)
    assert np.allclose(val, -flipped)


def test_riesz_difference_on_support_raises():
    with pytest.raises(PotentialError):
        potential.riesz_difference(atom([0, 0, 0]), [0, 0, 0.0], [0, 0, 1.0])


def test_riesz_difference_flat_disc_limit():
    prev = None
    for R in (16.0, 64.0):
        mu = potential.boundary_measure(halfspace(3), np.zeros(3), R)
        val = potential.riesz_difference(mu, [0, 0, 1.0], [0, 0, -1.0])
        err = np.linalg.norm(val - [0, 0, -1])
        assert prev is None or err < prev
        prev = err
    assert prev < 0.05


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3),
       st.floats(0.1, 10))
def test_kernel_antisymmetric_and_homogeneous(x, lam):
    k = RieszKernel(2)
    x = np.array(x)
    assert np.array_equal(k(-x), -k(x))
    assert np.allclose(k(lam * x), lam ** -2 * k(x), rtol=1e-12)


@pytest.mark.parametrize("dom, x, y, tol", [
    (halfspace(3), [0, 0, 1.0], [0, 0, -1.0], 0.02),
    (hong_cone(), [1.0, 0, 0, 0], [2.0, 0, 0, 0], 0.05),
], ids=["halfspace", "hong"])
def test_riesz_green_identity(dom, x, y, tol):
    rec = potential.riesz_green_identity_check(dom, x, y, tolerance=tol)
    assert rec.passed and rec.value <= tol
    assert "windows" in rec.details


def test_riesz_green_identity_both_inside():
    rec = potential.riesz_green_identity_check(halfspace(3), [0, 0, 1.0], [0.5, 0, 2.0])
    assert rec.value <= 0.02


def test_pv_radial_density_vanishes():
    f = potential.bump(np.zeros(3), 0.5)
    mu = potential.boundary_measure(halfspace(3), np.zeros(3), 0.5, f, r_min=1e-3)
    _, pv = potential.pv_riesz(mu, np.zeros(3), [0.032, 0.016, 0.008, 0.004])
    assert np.linalg.norm(pv) <= 1e-12


def test_pv_tangential_closed_form():
    # f = z1 b(|z|) on the plane: the x1 component is (1/4) ∫ b(ρ) dρ
    b = potential.bump(np.zeros(3), 0.5)
    mu = potential.boundary_measure(halfspace(3), np.zeros(3), 0.5, lambda z: np.atleast_2d(z)[:, 0] * b(z),
                                    r_min=1e-3)
    _, pv = potential.pv_riesz(mu, np.zeros(3), [0.032, 0.016, 0.008, 0.004])
    exact = 0.25 * quad(lambda r: math.exp(1 - 1 / (1 - (r / 0.5) ** 2)), 0, 0.5)[0]
    assert pv[0] == pytest.approx(exact, rel=0.01)


def test_pv_truncation_errors():
    mu = potential.boundary_measure(halfspace(3), np.zeros(3), 0.5, r_min=1e-2)
    with pytest.raises(PotentialError):
        potential.pv_riesz(mu, np.zeros(3), [0.1, 1e-4])
    with pytest.raises(PotentialError):
        potential.pv_riesz(mu, np.zeros(3), [0.05, 0.1])


def test_jump_halfspace():
    rep = potential.jump_relation_check(halfspace(3), np.zeros(3))
    assert np.allclose(rep.expected_jump, [0, 0, -1])
    assert rep.jump_residual <= 0.02


def test_jump_zero_density():
    f = potential.bump(np.array([2.0, 0, 0]), 0.5)
    rep = potential.jump_relation_check(halfspace(3), np.zeros(3), f=f)
    assert np.linalg.norm(rep.limit_plus - rep.limit_minus) <= 0.02


def test_jump_kp_smooth_point():
    rep = potential.jump_relation_check(kp_cone(), np.array([1.0, 0, 0, 1.0]) / math.sqrt(2))
    assert rep.jump_residual <= 0.03


def test_jump_vertex_rejected():
    with pytest.raises(VertexError):
        potential.jump_relation_check(kp_cone(), np.zeros(4))


def test_gradient_limit_halfspace():
    rec = potential.nontangential_gradient_limit_check(halfspace(3), np.zeros(3))
    assert rec.value == 0.0


def test_gradient_limit_hong(profile):
    xi = np.array([math.cos(profile.theta0), 0, math.sin(profile.theta0), 0])
    rec = potential.nontangential_gradient_limit_check(hong_cone(), xi, profile=profile)
    assert rec.value <= 1e-3


def test_approach_aperture():
    with pytest.raises(ValueError):
        ApproachSpec(np.zeros(3), np.array([0, 0, 1.0]), 1.5)
    tangential = ApproachSpec(np.zeros(3), np.array([1.0, 0, 0.1]) / math.hypot(1, 0.1))
    with pytest.raises(PotentialError):
        tangential.side(halfspace(3))


def test_gradient_bound_check(profile):
    assert potential.gradient_bound_check(halfspace(3), [0.2, 0.1, 3.0]).passed
    res = potential.gradient_bound_check(hong_cone(), [1.0, 0, 0, 0], profile=profile)
    assert res.passed and res.gradient_norm == pytest.approx(profile.tau, rel=1e-9)


def test_gradient_bound_kp_grid():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (400, 4))
    pts = pts[kp_cone().signed_distance(pts) > 0][:100]
    assert all(potential.gradient_bound_check(kp_cone(), p).passed for p in pts)


def test_riesz_sum_thread_independent():
    from ntalab import _accel

    rng = np.random.default_rng(1)
    mu = atom(rng.normal(size=(20_000, 3)), rng.random(20_000))
    x, y = np.array([5.0, 0, 0]), np.array([0, 5.0, 0])
    _accel.set_threads(1)
    a = potential.riesz_difference(mu, x, y)
    _accel.set_threads(None)
    b = potential.riesz_difference(mu, x, y)
    assert np.array_equal(a, b)
