"""Acceptance battery: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from ntalab import blowup, cones, density, potential, wos
from ntalab.geometry import (
    Plane, beta_number, corkscrew_constant, flatness_theta, halfspace, hong_cone, kp_cone,
    perturbed_graph, sample_boundary,
)
from ntalab.wos import WalkConfig

pytestmark = pytest.mark.acceptance


# collected for the terminal summary (see conftest.py), so plain `pytest -v` shows them
LINES = []


def verdict(number, ok, detail, start, budget):
    elapsed = time.perf_counter() - start
    in_time = elapsed <= budget
    status = "PASS" if ok and in_time else "FAIL"
    line = f"{status} criterion {number}: {detail} [{elapsed:.1f} s / {budget:.0f} s]"
    LINES.append((number, line))
    print("\n" + line)
    assert ok, detail
    assert in_time, f"runtime {elapsed:.1f} s exceeds {budget} s"


@pytest.fixture(scope="module")
def profile():
    return cones.solve_profile_ode()


def hong_smooth_point(theta0):
    return np.array([math.cos(theta0), 0.0, math.sin(theta0), 0.0])


def test_1_halfspace_harmonic_measure():
    t = time.perf_counter()
    dom = halfspace(3)
    cfg = WalkConfig(walks=100_000, seed=1)
    pole = np.array([0.0, 0.0, 1.0])
    cloud = wos.hit_cloud(dom, pole, cfg)
    half = wos.harmonic_measure(dom, pole, lambda z: z[:, 0] > 0, cfg, cloud)
    disc = wos.harmonic_measure(dom, pole, lambda z: np.linalg.norm(z[:, :2], axis=1) < 1, cfg, cloud)
    exact = 1 - 1 / math.sqrt(2)
    z_half = abs(half.value - 0.5) / half.std_error
    z_disc = abs(disc.value - exact) / disc.std_error
    verdict(1, z_half <= 3 and z_disc <= 3,
            f"half {half.value:.4f} ({z_half:.2f} SE), disc {disc.value:.4f} vs {exact:.4f} ({z_disc:.2f} SE)",
            t, 10)


def test_2_green_function_images():
    t = time.perf_counter()
    g = wos.green_finite_pole(halfspace(3), [0, 0, 3.0], [0, 0, 1.0], WalkConfig(walks=100_000, seed=2))
    exact = 1 / (16 * math.pi)
    rel = abs(g.value - exact) / exact
    verdict(2, rel <= 0.02, f"g = {g.value:.5f} vs {exact:.5f}, relative error {rel:.4f}", t, 10)


def test_3_jump_relation():
    t = time.perf_counter()
    flat = potential.jump_relation_check(halfspace(3), [0.0, 0.0, 0.0])
    kp = potential.jump_relation_check(kp_cone(), np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2))
    verdict(3, flat.jump_residual <= 0.02 and kp.jump_residual <= 0.03,
            f"half-space residual {flat.jump_residual:.2e}, KP residual {kp.jump_residual:.2e}", t, 30)


def test_4_riesz_green_identity():
    t = time.perf_counter()
    cfg = WalkConfig(seed=4)
    flat = potential.riesz_green_identity_check(halfspace(3), [0, 0, 1.0], [0, 0, -1.0], cfg, tolerance=0.02)
    hong = potential.riesz_green_identity_check(hong_cone(), [1.0, 0, 0, 0], [2.0, 0, 0, 0], cfg, tolerance=0.05)
    diagnostics = "windows" in flat.details and "windows" in hong.details
    verdict(4, flat.passed and hong.passed and diagnostics,
            f"half-space residual {flat.value:.2e}, Hong residual {hong.value:.2e}", t, 60)


def test_5_hong_profile(profile):
    t = time.perf_counter()
    prof = cones.solve_profile_ode(1e-3, 1e-10)
    rep = cones.verify_overdetermined(prof, 200, 0, (0.02, 0.01, 0.005))
    ok = (0 < prof.theta0 < math.pi / 2 and abs(prof.root_residual) <= 1e-12 and prof.f_prime_at_theta0 < 0
          and rep.bc_residual <= 1e-10 and rep.eigen_residual <= 10 * 1e-10 and rep.laplacian_order >= 1.9
          and rep.theta0_agreement <= 1e-9)
    verdict(5, ok, f"theta0 {prof.theta0:.13f}, |f| {prof.root_residual:.1e}, f' {prof.f_prime_at_theta0:.3f}, "
                   f"bc {rep.bc_residual:.1e}, eigen {rep.eigen_residual:.1e}, order {rep.laplacian_order:.2f}, "
                   f"agreement {rep.theta0_agreement:.1e}", t, 10)


def test_6_hong_poisson_kernel(profile):
    t = time.perf_counter()
    dom = hong_cone()
    bs = sample_boundary(dom, np.zeros(4), 2.0, 400, seed=6)
    pts = bs.points[np.linalg.norm(bs.points, axis=1) > 0.05][:100]
    h = cones.hong_h(profile, pts)
    explicit_err = float(np.max(np.abs(h - 1)))
    radii = [2.0 ** -k for k in range(2, 7)]
    trace = density.finite_pole_kernel_ratios(dom, hong_smooth_point(profile.theta0), radii,
                                              density.pole_orbit([10.0, 0, 0, 0], 4), [1.0, 0, 0, 0],
                                              WalkConfig(walks=40_000, seed=6), profile=profile)
    xi = hong_smooth_point(profile.theta0)
    exact = np.array([cones.hong_value(profile, xi - r * dom.outer_normal(xi)[0])[0] / r for r in radii])
    worst_z = float(np.max(np.abs(trace.ratios - exact) / trace.std_errors))
    ok = (len(pts) == 100 and explicit_err <= 1e-3 and abs(trace.extrapolated - 1) <= 0.05
          and abs(trace.ratios[-1] - 1) <= 0.05 and worst_z <= 4)
    verdict(6, ok, f"max ||grad v| - 1| {explicit_err:.1e}; ratios {np.round(trace.ratios, 3).tolist()} "
                   f"-> {trace.extrapolated:.3f}; max deviation from u(xi - r n)/r {worst_z:.1f} SE", t, 120)


def test_7_vmo_dichotomy():
    t = time.perf_counter()
    scales = [2.0 ** k for k in range(6, -7, -1)]
    flat = halfspace(3)
    prof = density.vmo_profile(flat, density.normal_field(flat), scales, 4, seed=7, samples=2000)
    flat_sup = float(np.max(prof.sup_oscillation))
    detail, ok = [f"half-space sup {flat_sup:.1e}"], flat_sup == 0
    for name, dom in (("Hong", hong_cone()), ("KP", kp_cone())):
        osc = np.array([density.oscillation(density.normal_field(dom), dom.vertex(), r, 3000, 7) for r in scales])
        spread = float((osc.max() - osc.min()) / osc.mean())
        ok = ok and spread <= 0.02 and osc.min() > 0.1
        detail.append(f"{name} vertex oscillation {osc.min():.4f}..{osc.max():.4f} (spread {spread:.1e})")
    verdict(7, ok, "; ".join(detail), t, 60)


def test_8_gradient_bound(profile):
    t = time.perf_counter()
    rng = np.random.default_rng(8)
    detail, ok = [], True
    for dom in (halfspace(3), kp_cone(), hong_cone()):
        pts = rng.uniform(-2, 2, (40_000, dom.dim))
        pts = pts[dom.signed_distance(pts) > 0][:10_000]
        res = potential.gradient_bound_sweep(dom, pts, profile)
        ok = ok and res["samples"] == 10_000 and res["pass"]
        detail.append(f"{dom.kind} max {res['max_gradient']:.9f}")
    verdict(8, ok, "; ".join(detail) + f" (bound {res['bound']:.6f})", t, 60)


def test_9_variational():
    from ntalab.experiments import variational_test_field

    t = time.perf_counter()
    u = lambda z: np.maximum(np.atleast_2d(z)[:, -1], 0.0)
    fake = lambda z: 2 * np.maximum(np.atleast_2d(z)[:, -1], 0.0)
    c = np.zeros(3)
    sph = blowup.sphere_average_check(u, c, [0.5, 1.0, 2.0])
    sph_err = max(abs(v - math.pi) / math.pi for _, v in sph)
    fval = blowup.ac_functional(u, c, 1.0, 1 / 32)
    f_err = abs(fval - 4 * math.pi / 3) / (4 * math.pi / 3)
    phi = variational_test_field(3)
    spacings = [1 / 16, 1 / 32, 1 / 64, 1 / 128]
    sweep = blowup.refinement_sweep(lambda h: blowup.first_variation_residual(u, phi, c, 1.0, h), spacings)
    fakes = blowup.refinement_sweep(lambda h: blowup.first_variation_residual(fake, phi, c, 1.0, h), spacings)
    order = blowup.convergence_order(sweep)
    fake_min = min(abs(v) for _, v in fakes)
    ok = sph_err <= 0.01 and f_err <= 0.02 and order >= 0.9 and fake_min >= 1e-3
    verdict(9, ok, f"sphere error {sph_err:.1e}, functional {fval:.4f} ({f_err:.3f}), order {order:.2f}, "
                   f"counterfeit min {fake_min:.4f}", t, 120)


def test_10_blowup_blowdown(profile):
    t = time.perf_counter()
    dom = hong_cone()
    smooth = blowup.theta_trace(dom, hong_smooth_point(profile.theta0), [0.4, 0.2, 0.1, 0.05], 3000, 10)
    slope = blowup.loglog_slope(smooth)
    vt = np.array([th for _, th in blowup.blowdown_theta_trace(dom, dom.vertex(), [0.25, 0.5, 1, 2, 4, 8],
                                                                3000, 10)])
    spread = float((vt.max() - vt.min()) / vt.mean())
    means = blowup.rescaled_kernel_means(halfspace(3), np.zeros(3), [0.1, 0.05, 0.025], [0, 0, 1.0],
                                         WalkConfig(walks=4_000_000, seed=10), points=32, seed=10)
    dev = max(abs(m.mean - 1) for m in means)
    ok = abs(slope - 1) <= 0.2 and spread <= 0.02 and dev <= 0.05
    verdict(10, ok, f"smooth slope {slope:.3f}, vertex spread {spread:.1e}, kernel means "
                    f"{[round(m.mean, 3) for m in means]}", t, 180)


def test_11_beta_theta_inequality():
    t = time.perf_counter()
    rng = np.random.default_rng(11)
    doms = [halfspace(3), perturbed_graph(3, 0.1, 1.0), kp_cone(), hong_cone()]
    cases, tries, failures, worst = 0, 0, [], -math.inf
    while cases < 50 and tries < 400:
        tries += 1
        dom = doms[tries % len(doms)]
        v = dom.vertex()
        centre = np.zeros(dom.dim) if v is None else v
        bs = sample_boundary(dom, centre, 1.0, 64, seed=int(rng.integers(1 << 30)))
        xi = bs.points[rng.integers(len(bs))]
        if v is not None and np.linalg.norm(xi - v) < 0.3:
            continue
        r = float(rng.uniform(0.05, 0.4))
        inward = -dom.outer_normal(xi)[0]
        tilt = rng.standard_normal(dom.dim)
        tilt -= (tilt @ inward) * inward
        tilt /= np.linalg.norm(tilt)
        ang = rng.uniform(0, 0.15)
        plane = Plane(xi + rng.uniform(-0.05, 0.05) * r * inward, math.cos(ang) * inward + math.sin(ang) * tilt)
        C = corkscrew_constant(dom, xi, r)
        beta = beta_number(dom, xi, r, plane, count=1500, seed=tries)
        if not beta < 1 / (2 * C):
            continue
        rep = flatness_theta(dom, xi, r / 2, plane, count=1500, seed=tries)
        cases += 1
        worst = max(worst, rep.theta - 2 * beta)
        if rep.theta > 2 * beta + rep.max_gap_bound:
            failures.append((dom.kind, r, beta, rep.theta))
    verdict(11, cases == 50 and not failures,
            f"{cases} configurations, {len(failures)} violations, max Theta - 2 beta = {worst:.2e}", t, 60)


def test_12_suite_reproducible(tmp_path):
    t = time.perf_counter()
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        res = subprocess.run([sys.executable, "-m", "ntalab", "suite", "--seed", "0", "--threads", "1",
                              "--out", str(out)], capture_output=True, text=True)
        assert res.returncode == 0, res.stdout + res.stderr
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir() if ".timing." not in p.name)
    same = names == sorted(p.name for p in outs[1].iterdir() if ".timing." not in p.name)
    diff = [n for n in names if (outs[0] / n).read_bytes() != (outs[1] / n).read_bytes()]
    suite = json.loads((outs[0] / "suite.json").read_text())
    verdict(12, same and not diff and suite["pass"],
            f"{len(names)} report files, {len(diff)} differ, suite pass {suite['pass']}", t, 600)
