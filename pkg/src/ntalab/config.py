"""TOML experiment configs with documented defaults and full validation.

A config looks like::

    experiment = "flatness"
    seed = 0
    domain = "kp_cone"            # or a table: [domain] kind = "halfspace", dim = 3

    [params]
    radii = [1, 2, 4]

    [walk]
    walks = 100000

    [tolerances]
    theta_spread = 0.02

Every tolerance used by a verdict lives in ``DEFAULTS`` below and can be
overridden under ``[tolerances]``.
"""
from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .geometry.domains import DomainError, make_domain

EXPERIMENTS = ("flatness", "wos", "riesz", "jump", "vmo", "cone", "blowup", "variational")
CONFIG_KINDS = ("halfspace", "kp_cone", "hong_cone", "product_cone", "perturbed_graph")
TOP_KEYS = ("experiment", "seed", "threads", "output", "domain", "walk", "params", "tolerances")
WALK_KEYS = ("walks", "eps_shell", "max_steps", "step_fraction")

# per experiment: default domain, params, walk knobs and tolerances
DEFAULTS = {
    "flatness": {
        "domain": {"kind": "kp_cone"},
        "params": {"point": None, "radii": [1.0, 2.0, 4.0], "samples": 3000},
        "walk": {},
        "tolerances": {"theta_spread": 0.02, "theta_flat": 1e-9},
    },
    "wos": {
        "domain": {"kind": "halfspace", "dim": 3},
        "params": {"pole": [0.0, 0.0, 1.0], "green_point": [0.0, 0.0, 3.0]},
        "walk": {"walks": 100_000},
        "tolerances": {"std_errors": 3.0, "green_relative": 0.02, "mass": 0.999},
    },
    "riesz": {
        "domain": {"kind": "halfspace", "dim": 3},
        "params": {"x": None, "y": None, "windows": [16.0, 32.0, 64.0]},
        "walk": {},
        "tolerances": {"residual_halfspace": 0.02, "residual": 0.05},
    },
    "jump": {
        "domain": {"kind": "halfspace", "dim": 3},
        "params": {"xi": None, "support": None},
        "walk": {},
        "tolerances": {"jump_halfspace": 0.02, "jump": 0.03},
    },
    "vmo": {
        "domain": {"kind": "halfspace", "dim": 3},
        "params": {"field": "normal", "scales": [64.0, 8.0, 1.0, 0.125, 0.015625], "centers": 8,
                   "samples": 4000},
        "walk": {},
        "tolerances": {"zero": 1e-12, "spread": 0.02, "lower_bound": 0.1, "log_h": 1e-6},
    },
    "cone": {
        "domain": {"kind": "hong_cone"},
        "params": {"step": 1e-3, "ode_tol": 1e-10, "laplacian_steps": [0.02, 0.01, 0.005], "samples": 200},
        "walk": {},
        "tolerances": {"root": 1e-12, "bc": 1e-10, "eigen_factor": 10.0, "order": 1.9, "agreement": 1e-9},
    },
    "blowup": {
        "domain": {"kind": "hong_cone"},
        "params": {"point": None, "blowup_radii": [0.4, 0.2, 0.1, 0.05],
                   "vertex_radii": [0.25, 0.5, 1.0, 2.0, 4.0, 8.0], "samples": 3000,
                   "kernel_radii": [0.1, 0.05], "kernel_points": 32},
        "walk": {"walks": 1_000_000},
        "tolerances": {"slope": 0.2, "vertex_spread": 0.02, "kernel_mean": 0.05},
    },
    "variational": {
        "domain": {"kind": "halfspace", "dim": 3},
        "params": {"sphere_radii": [0.5, 1.0, 2.0], "functional_spacing": 0.03125,
                   "spacings": [0.0625, 0.03125, 0.015625, 0.0078125]},
        "walk": {},
        "tolerances": {"sphere_relative": 0.01, "functional_relative": 0.02, "order": 0.9,
                       "counterfeit_min": 1e-3},
    },
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    experiment: str
    domain: dict
    params: dict
    tolerances: dict
    walk: dict = field(default_factory=dict)
    seed: int = 0
    threads: Optional[int] = None
    output: Optional[str] = None

    def walk_config(self):
        from .wos import WalkConfig

        return WalkConfig(seed=self.seed, threads=self.threads, **self.walk)

    def build_domain(self):
        return make_domain(self.domain)

    def echo(self):
        return {"experiment": self.experiment, "domain": self.domain, "params": self.params,
                "tolerances": self.tolerances, "walk": self.walk, "seed": self.seed,
                "threads": self.threads}


def _positive_list(name, v, errors, decreasing=False, increasing=False):
    if not isinstance(v, list) or not v or not all(isinstance(x, (int, float)) for x in v):
        errors.append(f"{name} must be a non-empty list of numbers")
        return
    if any(not x > 0 for x in v):
        errors.append(f"{name} entries must be > 0")
    if decreasing and any(b >= a for a, b in zip(v, v[1:])):
        errors.append(f"{name} must be decreasing")
    if increasing and any(b <= a for a, b in zip(v, v[1:])):
        errors.append(f"{name} must be increasing")


def _point(name, v, errors):
    if v is not None and (not isinstance(v, list) or not all(isinstance(x, (int, float)) for x in v)):
        errors.append(f"{name} must be a list of numbers")


def _check_params(exp, p, errors):
    if exp == "flatness":
        _point("point", p["point"], errors)
        _positive_list("radii", p["radii"], errors)
    elif exp == "wos":
        _point("pole", p["pole"], errors)
        _point("green_point", p["green_point"], errors)
    elif exp == "riesz":
        _point("x", p["x"], errors)
        _point("y", p["y"], errors)
        _positive_list("windows", p["windows"], errors, increasing=True)
        if isinstance(p["windows"], list) and len(p["windows"]) < 2:
            errors.append("windows needs at least two entries")
    elif exp == "jump":
        _point("xi", p["xi"], errors)
        if p["support"] is not None and not (isinstance(p["support"], (int, float)) and p["support"] > 0):
            errors.append("support must be > 0")
    elif exp == "vmo":
        if p["field"] not in ("normal", "log_h"):
            errors.append("field must be 'normal' or 'log_h'")
        _positive_list("scales", p["scales"], errors, decreasing=True)
        if not (isinstance(p["centers"], int) and p["centers"] >= 1):
            errors.append("centers ≥ 1")
    elif exp == "cone":
        if not (isinstance(p["step"], (int, float)) and 0 < p["step"] <= 0.05):
            errors.append("step must lie in (0, 0.05]")
        if not (isinstance(p["ode_tol"], (int, float)) and 0 < p["ode_tol"] < 1e-3):
            errors.append("ode_tol must lie in (0, 1e-3)")
        _positive_list("laplacian_steps", p["laplacian_steps"], errors, decreasing=True)
    elif exp == "blowup":
        _point("point", p["point"], errors)
        _positive_list("blowup_radii", p["blowup_radii"], errors, decreasing=True)
        _positive_list("vertex_radii", p["vertex_radii"], errors, increasing=True)
        if p["kernel_radii"]:
            _positive_list("kernel_radii", p["kernel_radii"], errors, decreasing=True)
    elif exp == "variational":
        _positive_list("sphere_radii", p["sphere_radii"], errors)
        _positive_list("spacings", p["spacings"], errors, decreasing=True)
        if isinstance(p["functional_spacing"], (int, float)) and p["functional_spacing"] > 1 / 16:
            errors.append("functional_spacing must be at most radius / 16 = 0.0625")
    for key in ("samples",):
        if key in p and not (isinstance(p[key], int) and p[key] >= 1):
            errors.append(f"{key} ≥ 1")


def _check_walk(w, errors):
    for k, v in w.items():
        if k not in WALK_KEYS:
            errors.append(f"unknown walk knob {k!r}; expected one of {', '.join(WALK_KEYS)}")
        elif not isinstance(v, (int, float)) or isinstance(v, bool):
            errors.append(f"{k} must be a number")
    if "walks" in w and isinstance(w["walks"], (int, float)) and not w["walks"] >= 1:
        errors.append("walks ≥ 1")
    if "max_steps" in w and isinstance(w["max_steps"], (int, float)) and not w["max_steps"] >= 1:
        errors.append("max_steps ≥ 1")
    if "eps_shell" in w and isinstance(w["eps_shell"], (int, float)) and not w["eps_shell"] > 0:
        errors.append("eps_shell > 0")
    if "step_fraction" in w and isinstance(w["step_fraction"], (int, float)) \
            and not 0 < w["step_fraction"] <= 1:
        errors.append("step_fraction in (0, 1]")
    for k in ("walks", "max_steps"):
        if isinstance(w.get(k), float):
            if w[k].is_integer():
                w[k] = int(w[k])
            else:
                errors.append(f"{k} must be an integer")


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a config mapping, collecting every problem before raising :class:`ConfigError`."""
    errors = []
    data = copy.deepcopy(dict(data))
    for k in data:
        if k not in TOP_KEYS:
            errors.append(f"unknown key {k!r}; expected one of {', '.join(TOP_KEYS)}")
    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        errors.append(f"unknown experiment {exp!r}; supported: {', '.join(EXPERIMENTS)}")
        raise ConfigError(errors)
    base = DEFAULTS[exp]

    dom = data.get("domain", base["domain"])
    if isinstance(dom, str):
        dom = {"kind": dom}
    if not isinstance(dom, dict):
        errors.append("domain must be a kind name or a table")
        dom = dict(base["domain"])
    elif dom.get("kind") not in CONFIG_KINDS:
        errors.append(f"unknown domain kind {dom.get('kind')!r}; supported kinds: {', '.join(CONFIG_KINDS)}")
    else:
        try:
            make_domain(dom)
        except (DomainError, ValueError, TypeError) as exc:
            errors.append(f"domain: {exc}")

    params = copy.deepcopy(base["params"])
    given = data.get("params", {})
    if "r" in given and "radii" not in given:
        given["radii"] = given.pop("r")
    for k, v in given.items():
        if k not in params:
            errors.append(f"unknown parameter {k!r} for {exp}; expected one of {', '.join(sorted(params))}")
        else:
            params[k] = v
    _check_params(exp, params, errors)

    tols = dict(base["tolerances"])
    for k, v in data.get("tolerances", {}).items():
        if k not in tols:
            errors.append(f"unknown tolerance {k!r} for {exp}; expected one of {', '.join(sorted(tols))}")
        elif not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
            errors.append(f"tolerance {k} must be a finite number ≥ 0")
        else:
            tols[k] = float(v)

    walk = dict(base["walk"])
    walk.update(data.get("walk", {}))
    _check_walk(walk, errors)

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        errors.append("seed must be an integer in [0, 2^64)")
    threads = data.get("threads")
    if threads is not None and (not isinstance(threads, int) or threads < 1):
        errors.append("threads ≥ 1")
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        errors.append("output must be a path string")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(exp, dom, params, tols, walk, seed, threads, output)


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"malformed TOML: {exc}"]) from None
    return config_from_dict(data)


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    data = {"experiment": experiment}
    data.update(overrides)
    return config_from_dict(data)
