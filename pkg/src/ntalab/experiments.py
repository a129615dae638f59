"""Experiment runners: one per CLI subcommand, each returning a :class:`ReportRecord`."""
from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from . import blowup, cones, density, potential, wos
from ._accel import backend
from .config import ExperimentConfig, default_config
from .geometry import best_plane
from .geometry.domains import BLOCKCONE, HALFSPACE, DomainError
from .report import ReportRecord, Verdict


def _axis_pair(domain):
    """Two interior points on a symmetry axis (``x``, ``y``) with ``y`` exterior for half-spaces."""
    if domain.code == HALFSPACE:
        e = np.asarray(domain.params[1:], float)
        return e, -e
    e = np.zeros(domain.dim)
    e[0] = 1.0
    if domain.signed_distance(np.stack([e, 2 * e])).min() <= 0:
        raise DomainError("no default axis pair for this domain; set params.x and params.y")
    return e, 2 * e


def _smooth_point(domain):
    if domain.code == HALFSPACE:
        return domain.project(np.zeros(domain.dim))[0]
    if domain.code == BLOCKCONE:
        k, m, t0 = domain.params
        p = np.zeros(domain.dim)
        p[0] = math.cos(t0)
        p[int(k)] = math.sin(t0)
        return p
    return domain.project(np.zeros(domain.dim))[0]


def _spread(values):
    v = np.asarray(values, float)
    return float((v.max() - v.min()) / abs(v.mean()))


def run_flatness(cfg: ExperimentConfig, out_dir, name):
    dom = cfg.build_domain()
    p, tol = cfg.params, cfg.tolerances
    x = np.asarray(p["point"], float) if p["point"] is not None else (
        dom.vertex() if dom.vertex() is not None else dom.project(np.zeros(dom.dim))[0])
    reports = [best_plane(dom, x, float(r), count=p["samples"], seed=cfg.seed) for r in p["radii"]]
    thetas = [r.theta for r in reports]
    verdicts = []
    if dom.code == HALFSPACE:
        verdicts.append(Verdict("theta_flat", max(thetas), tol["theta_flat"]))
    elif dom.is_cone and dom.vertex() is not None and np.allclose(x, dom.vertex()) and len(thetas) > 1:
        verdicts.append(Verdict("theta_scale_spread", _spread(thetas), tol["theta_spread"]))
    return {"point": x, "reports": [r.as_dict() for r in reports]}, verdicts, []


def run_wos(cfg: ExperimentConfig, out_dir, name):
    dom = cfg.build_domain()
    wc = cfg.walk_config()
    p, tol = cfg.params, cfg.tolerances
    pole = np.asarray(p["pole"], float)
    cloud = wos.hit_cloud(dom, pole, wc)
    half = wos.harmonic_measure(dom, pole, lambda z: np.atleast_2d(z)[:, 0] > 0, wc, cloud)
    disc = wos.harmonic_measure(dom, pole, lambda z: np.linalg.norm(np.atleast_2d(z)[:, :-1], axis=1) < 1,
                                wc, cloud)
    mass = cloud.total_mass
    gp = np.asarray(p["green_point"], float)
    g = wos.green_finite_pole(dom, gp, pole, wc.with_(seed=wc.seed + 1))
    out = {"pole": pole, "walks": wc.walks, "total_mass": mass, "truncated": cloud.truncated,
           "mean_steps": cloud.meta["mean_steps"], "omega_half": half, "omega_unit_disc": disc,
           "green": g, "green_point": gp}
    verdicts = [Verdict("total_mass", mass, tol["mass"], ">=")]
    standard = dom.code == HALFSPACE and np.allclose(dom.params, [0, *np.eye(dom.dim)[-1]])
    if standard and dom.dim == 3:
        h = pole[-1]
        exact_disc = 1 - h / math.sqrt(1 + h * h) if np.allclose(pole[:-1], 0) else None
        verdicts.append(Verdict("omega_half_z", (half.value - 0.5) / max(half.std_error, 1e-300),
                                tol["std_errors"], "within", "symmetry oracle 1/2, in standard errors"))
        if exact_disc is not None:
            out["omega_unit_disc_exact"] = exact_disc
            verdicts.append(Verdict("omega_disc_z", (disc.value - exact_disc) / max(disc.std_error, 1e-300),
                                    tol["std_errors"], "within", "closed form 1 - h/sqrt(1+h^2)"))
        refl = gp.copy()
        refl[-1] = -refl[-1]
        exact_g = float(wos.fundamental_solution(gp - pole)[0] - wos.fundamental_solution(refl - pole)[0])
        out["green_exact"] = exact_g
        verdicts.append(Verdict("green_relative_error", abs(g.value - exact_g) / exact_g, tol["green_relative"],
                                note="method of images"))
    return out, verdicts, []


def run_riesz(cfg: ExperimentConfig, out_dir, name):
    dom = cfg.build_domain()
    p, tol = cfg.params, cfg.tolerances
    x, y = _axis_pair(dom)
    x = np.asarray(p["x"], float) if p["x"] is not None else x
    y = np.asarray(p["y"], float) if p["y"] is not None else y
    t = tol["residual_halfspace"] if dom.code == HALFSPACE else tol["residual"]
    rec = potential.riesz_green_identity_check(dom, x, y, cfg.walk_config(), windows=p["windows"], tolerance=t)
    return rec.as_dict(), [Verdict("identity_residual", rec.value, t)], []


def run_jump(cfg: ExperimentConfig, out_dir, name):
    dom = cfg.build_domain()
    p, tol = cfg.params, cfg.tolerances
    xi = np.asarray(p["xi"], float) if p["xi"] is not None else _jump_point(dom)
    rep = potential.jump_relation_check(dom, xi, support=p["support"])
    t = tol["jump_halfspace"] if dom.code == HALFSPACE else tol["jump"]
    return {"xi": xi, **rep.as_dict()}, [Verdict("jump_residual", rep.jump_residual, t)], []


def _jump_point(dom):
    if dom.kind == "kp_cone":
        return np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2)
    return _smooth_point(dom)


def run_vmo(cfg: ExperimentConfig, out_dir, name):
    dom = cfg.build_domain()
    p, tol = cfg.params, cfg.tolerances
    if p["field"] == "normal":
        fld = density.normal_field(dom)
    else:
        sol = cones.explicit_solution(dom)
        fld = density.log_field(dom, lambda z: np.linalg.norm(
            sol.gradient(z - 1e-9 * dom.outer_normal(z, check_vertex=False)), axis=1))
    prof = density.vmo_profile(dom, fld, p["scales"], p["centers"], cfg.seed, samples=p["samples"])
    side = []
    if out_dir is not None:
        path = Path(out_dir) / f"{name}_profile.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        prof.to_csv(path)
        side.append(path.name)
    out = {"profile": prof.as_dict()}
    verdicts = []
    if dom.code == HALFSPACE or p["field"] == "log_h":
        key = "zero" if p["field"] == "normal" else "log_h"
        verdicts.append(Verdict("sup_oscillation", float(np.max(prof.sup_oscillation)), tol[key]))
    elif dom.vertex() is not None:
        at_vertex = [density.oscillation(fld, dom.vertex(), r, p["samples"], cfg.seed) for r in p["scales"]]
        out["vertex_oscillation"] = at_vertex
        verdicts.append(Verdict("vertex_scale_spread", _spread(at_vertex), tol["spread"]))
        verdicts.append(Verdict("vertex_lower_bound", min(at_vertex), tol["lower_bound"], ">="))
    return out, verdicts, side


def run_cone(cfg: ExperimentConfig, out_dir, name):
    p, tol = cfg.params, cfg.tolerances
    prof = cones.solve_profile_ode(p["step"], p["ode_tol"])
    rep = cones.verify_overdetermined(prof, p["samples"], cfg.seed, tuple(p["laplacian_steps"]))
    side = []
    if out_dir is not None:
        path = Path(out_dir) / f"{name}_profile.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        prof.to_csv(path, stride=10)
        side.append(path.name)
    f_root = prof.root_residual
    verdicts = [
        Verdict("f_at_theta0", abs(f_root), tol["root"]),
        Verdict("f_prime_at_theta0", prof.f_prime_at_theta0, -1e-12, "<="),
        Verdict("bc_residual", rep.bc_residual, tol["bc"]),
        Verdict("eigen_residual", rep.eigen_residual, tol["eigen_factor"] * p["ode_tol"]),
        Verdict("laplacian_order", rep.laplacian_order, tol["order"], ">="),
        Verdict("theta0_agreement", rep.theta0_agreement, tol["agreement"]),
    ]
    return {"profile": prof.as_dict(), "f_at_theta0": f_root, "verification": rep.as_dict()}, verdicts, side


def run_blowup(cfg: ExperimentConfig, out_dir, name):
    dom = cfg.build_domain()
    p, tol = cfg.params, cfg.tolerances
    x = np.asarray(p["point"], float) if p["point"] is not None else _smooth_point(dom)
    out, verdicts = {"point": x}, []
    smooth = blowup.theta_trace(dom, x, p["blowup_radii"], p["samples"], cfg.seed)
    slope = blowup.loglog_slope(smooth)
    out["smooth_trace"] = smooth
    out["smooth_slope"] = slope
    verdicts.append(Verdict("smooth_slope_minus_1", slope - 1.0, tol["slope"], "within"))
    if dom.vertex() is not None:
        vt = blowup.blowdown_theta_trace(dom, dom.vertex(), p["vertex_radii"], p["samples"], cfg.seed)
        out["vertex_trace"] = vt
        verdicts.append(Verdict("vertex_theta_spread", _spread([t for _, t in vt]), tol["vertex_spread"]))
        out["vertex_normal_integrals"] = blowup.normal_vmo_blowup_integral(
            [blowup.rescale_domain(dom, dom.vertex(), r) for r in p["vertex_radii"][:3]], seed=cfg.seed)
    if p["kernel_radii"]:
        hs = _standard_halfspace()
        wc = cfg.walk_config()
        pole = np.zeros(3)
        pole[-1] = 1.0
        means = blowup.rescaled_kernel_means(hs, np.zeros(3), p["kernel_radii"], pole, wc,
                                             points=p["kernel_points"], seed=cfg.seed)
        out["halfspace_kernel_means"] = [m.as_dict() for m in means]
        verdicts.append(Verdict("kernel_mean_deviation", max(abs(m.mean - 1) for m in means),
                                tol["kernel_mean"]))
    return out, verdicts, []


def _standard_halfspace():
    from .geometry import halfspace

    return halfspace(3)


def _x3_plus(scale=1.0):
    return lambda z: scale * np.maximum(np.atleast_2d(z)[:, -1], 0.0)


def variational_test_field(dim=3):
    """Bump ``b e_d`` of half-width 0.4 centred at height 0.304 (inflection of the 1-d profile)."""
    c = np.zeros(dim)
    c[-1] = 0.76 * 0.4
    e = np.zeros(dim)
    e[-1] = 1.0
    return blowup.bump_field(c, 0.4, e, "normal_bump")


def run_variational(cfg: ExperimentConfig, out_dir, name):
    p, tol = cfg.params, cfg.tolerances
    dim = cfg.build_domain().dim
    u, fake = _x3_plus(), _x3_plus(2.0)
    c = np.zeros(dim)
    area = math.pi if dim == 3 else None
    sph = blowup.sphere_average_check(u, c, p["sphere_radii"])
    ball = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    fval = blowup.ac_functional(u, c, 1.0, p["functional_spacing"])
    phi = variational_test_field(dim)
    sweep = blowup.refinement_sweep(lambda h: blowup.first_variation_residual(u, phi, c, 1.0, h), p["spacings"])
    fake_sweep = blowup.refinement_sweep(lambda h: blowup.first_variation_residual(fake, phi, c, 1.0, h),
                                         p["spacings"])
    order = blowup.convergence_order(sweep)
    side = []
    if out_dir is not None:
        path = Path(out_dir) / f"{name}_refinement.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        blowup.sweep_to_csv(sweep, path)
        side.append(path.name)
    report = blowup.VariationalReport((tuple(c), 1.0), fval, [(phi.name, sweep[-1][1])], p["spacings"][-1])
    verdicts = [
        Verdict("functional_relative_error", abs(fval - ball) / ball, tol["functional_relative"],
                note="|B| (half-ball volume twice)"),
        Verdict("first_variation_order", order, tol["order"], ">="),
        Verdict("counterfeit_residual", min(abs(v) for _, v in fake_sweep), tol["counterfeit_min"], ">="),
    ]
    if area is not None:
        verdicts.insert(0, Verdict("sphere_average_relative_error",
                                   max(abs(v - area) / area for _, v in sph), tol["sphere_relative"]))
    return {"sphere_average": sph, "report": report.as_dict(), "first_variation": sweep,
            "counterfeit_first_variation": fake_sweep, "order": order}, verdicts, side


RUNNERS = {
    "flatness": run_flatness, "wos": run_wos, "riesz": run_riesz, "jump": run_jump, "vmo": run_vmo,
    "cone": run_cone, "blowup": run_blowup, "variational": run_variational,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None, name=None) -> ReportRecord:
    """Dispatch to the owning module and collect a report; side files go to ``out_dir``."""
    from . import _accel

    _accel.set_threads(cfg.threads)
    name = name or cfg.experiment
    t = time.perf_counter()
    outputs, verdicts, side = RUNNERS[cfg.experiment](cfg, out_dir, name)
    wall = time.perf_counter() - t
    inputs = cfg.echo()
    inputs["backend"] = backend()
    return ReportRecord(cfg.experiment, name, inputs, outputs, verdicts, cfg.seed, side, wall)


# the acceptance battery run by ``ntalab suite``
SUITE = (
    ("wos_halfspace", "wos", {}),
    ("riesz_halfspace", "riesz", {}),
    ("riesz_hong", "riesz", {"domain": "hong_cone"}),
    ("jump_halfspace", "jump", {}),
    ("jump_kp", "jump", {"domain": "kp_cone"}),
    ("cone", "cone", {}),
    ("vmo_halfspace", "vmo", {}),
    ("vmo_hong", "vmo", {"domain": "hong_cone", "params": {"centers": 4, "samples": 3000}}),
    ("vmo_kp", "vmo", {"domain": "kp_cone", "params": {"centers": 4, "samples": 3000}}),
    ("vmo_hong_log_h", "vmo", {"domain": "hong_cone", "params": {"field": "log_h", "centers": 4,
                                                                  "samples": 2000}}),
    ("flatness_kp", "flatness", {"params": {"radii": [1.0, 10.0, 100.0]}}),
    ("blowup_hong", "blowup", {}),
    ("variational", "variational", {"params": {"spacings": [0.0625, 0.03125, 0.015625]}}),
)


def suite_configs(seed=0, threads=None, walk=None):
    out = []
    for name, exp, over in SUITE:
        data = dict(over)
        data["seed"] = seed
        if threads is not None:
            data["threads"] = threads
        if walk:
            merged = dict(default_config(exp).walk)
            merged.update(walk)
            data["walk"] = merged
        out.append((name, default_config(exp, **data)))
    return out
