"""Riesz transforms of boundary measures and the identities they satisfy.

``K(x) = c_n x / |x|^{n+1}`` with ``c_n = -1/|S^n|`` is the gradient of the
fundamental solution in R^{n+1}.  Only differences ``Rμ(x) - Rμ(y)`` and
principal values are exposed; a single ``Rμ(x)`` of an infinite boundary is
defined only up to a constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import _accel
from ._accel import njit, prange
from .geometry.domains import BLOCKCONE, HALFSPACE, Domain, DomainError, VertexError
from .geometry.quadrature import (
    cone_quadrature, graph_patch_quadrature, polar_quadrature, sphere_area, tangent_basis,
)
from .wos import EmpiricalMeasure, WalkConfig, grad_u, hit_cloud

CHUNK = 4096


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class RieszKernel:
    n: int

    @property
    def dim(self):
        return self.n + 1

    @property
    def c(self):
        return -1.0 / sphere_area(self.n + 1)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        r = np.linalg.norm(x, axis=1)
        return self.c * x / r[:, None] ** (self.n + 1)


@njit(parallel=True)
def _riesz_partials(atoms, weights, x, y, c, power, chunk, partial):
    n_atoms, d = atoms.shape
    nchunk = partial.shape[0]
    for b in prange(nchunk):
        lo = b * chunk
        hi = min(lo + chunk, n_atoms)
        for j in range(lo, hi):
            rx = 0.0
            ry = 0.0
            for i in range(d):
                rx += (x[i] - atoms[j, i]) ** 2
                ry += (y[i] - atoms[j, i]) ** 2
            fx = c * weights[j] / rx ** (0.5 * power)
            fy = c * weights[j] / ry ** (0.5 * power)
            for i in range(d):
                partial[b, i] += fx * (x[i] - atoms[j, i]) - fy * (y[i] - atoms[j, i])


@njit(parallel=True)
def _riesz_single_partials(atoms, weights, x, c, power, chunk, partial):
    n_atoms, d = atoms.shape
    nchunk = partial.shape[0]
    for b in prange(nchunk):
        lo = b * chunk
        hi = min(lo + chunk, n_atoms)
        for j in range(lo, hi):
            r2 = 0.0
            for i in range(d):
                r2 += (x[i] - atoms[j, i]) ** 2
            f = c * weights[j] / r2 ** (0.5 * power)
            for i in range(d):
                partial[b, i] += f * (x[i] - atoms[j, i])


def _numpy_partials(atoms, weights, x, y, c, power, chunk):
    nchunk = max(1, -(-len(atoms) // chunk))
    partial = np.zeros((nchunk, atoms.shape[1]))
    for b in range(nchunk):
        a, w = atoms[b * chunk:(b + 1) * chunk], weights[b * chunk:(b + 1) * chunk]
        dx = x - a
        val = c * (w / np.sum(dx * dx, axis=1) ** (0.5 * power)) @ dx
        if y is not None:
            dy = y - a
            val = val - c * (w / np.sum(dy * dy, axis=1) ** (0.5 * power)) @ dy
        partial[b] = val
    return partial


def _riesz_sum(atoms, weights, x, y=None):
    """Chunked sum with partials combined in a fixed order (thread-count independent)."""
    atoms = np.ascontiguousarray(atoms, float)
    weights = np.ascontiguousarray(weights, float)
    d = atoms.shape[1]
    c = -1.0 / sphere_area(d)
    nchunk = max(1, -(-len(atoms) // CHUNK))
    if _accel.HAVE_NUMBA:
        partial = np.zeros((nchunk, d))
        if y is None:
            _riesz_single_partials(atoms, weights, np.asarray(x, float), c, float(d), CHUNK, partial)
        else:
            _riesz_partials(atoms, weights, np.asarray(x, float), np.asarray(y, float), c, float(d),
                            CHUNK, partial)
    else:
        partial = _numpy_partials(atoms, weights, np.asarray(x, float),
                                  None if y is None else np.asarray(y, float), c, float(d), CHUNK)
    return partial.sum(axis=0)


def _measure_scale(mu):
    return max(1.0, float(np.max(np.abs(mu.atoms))) if len(mu) else 1.0)


def riesz_difference(mu: EmpiricalMeasure, x, y):
    """``Σ w (K(x - z) - K(y - z))`` over the atoms of ``mu``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(mu) == 0:
        return np.zeros_like(x)
    tree = cKDTree(mu.atoms)
    tol = 1e-6 * _measure_scale(mu)
    if tree.query(x)[0] <= tol or tree.query(y)[0] <= tol:
        raise PotentialError("evaluation point lies on the support of the measure")
    return _riesz_sum(mu.atoms, mu.weights, x, y)


def riesz_at(mu: EmpiricalMeasure, x):
    """``Rμ(x)`` for a compactly supported finite measure (e.g. ``fσ`` with compact ``f``)."""
    return _riesz_sum(mu.atoms, mu.weights, np.asarray(x, float))


# ---------------------------------------------------------------------------
# the Riesz–Green identity


@dataclass
class ResidualRecord:
    check: str
    domain: dict
    points: list
    value: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {"check": self.check, "domain": self.domain, "points": self.points,
                "value": self.value, "tolerance": self.tolerance, "pass": self.passed,
                "details": self.details}


def boundary_measure(domain: Domain, focus, radius, density: Optional[Callable] = None, r_min=1e-3,
                     order=8, ang_order=None, per_octave=2) -> EmpiricalMeasure:
    """Deterministic quadrature of ``h σ`` on ``∂Ω ∩ B(focus, radius)``-like windows.

    Half-spaces use a polar rule about the foot of ``focus``; block cones use a
    parametric rule about the vertex (window ``|y| < radius``).  ``density`` is
    ``h`` (default 1).
    """
    if domain.code == HALFSPACE:
        foot = domain.project(np.asarray(focus, float))[0]
        basis = tangent_basis(domain.outer_normal(foot)[0])
        t, w = polar_quadrature(domain.dim - 1, r_min, radius, order=order, per_octave=per_octave,
                                ang_order=ang_order or _default_ang_order(domain.dim))
        pts = foot + t @ basis
    elif domain.code == BLOCKCONE:
        pts, w = cone_quadrature(domain, radius, r_min=r_min, order=order, ang_order=ang_order or 24)
    else:
        raise DomainError(f"no deterministic boundary quadrature for kind {domain.kind!r}")
    if density is None:
        return EmpiricalMeasure(pts, w, "surface")
    return EmpiricalMeasure(pts, w * np.asarray(density(pts), float), "weighted-surface")


def _grad_u_outside_zero(domain, z, mode, cfg, profile):
    if domain.signed_distance(np.asarray(z, float))[0] <= 0:
        return np.zeros(domain.dim)
    return np.asarray(grad_u(domain, z, mode, cfg, profile), float)


def riesz_green_identity_check(domain: Domain, x, y, cfg: Optional[WalkConfig] = None,
                               windows: Sequence[float] = (16.0, 32.0, 64.0), density=None,
                               mode="explicit", tolerance=0.02, profile=None, ang_order=None,
                               r_min=None) -> ResidualRecord:
    """``|Rω(x) - Rω(y) - (∇u(y) - ∇u(x))|`` with ``ω = h σ`` truncated to growing windows.

    The truncated differences ``D(R)`` are extrapolated as ``2 D(R_last) - D(R_prev)``
    (tail ``O(1/R)``); all window values are reported.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sd = domain.signed_distance(np.stack([x, y]))
    if np.any(np.abs(sd) < 1e-9):
        raise PotentialError("x and y must lie off the boundary")
    focus = 0.5 * (x + y)
    rmin = r_min if r_min is not None else 0.05 * float(np.min(np.abs(sd)))
    values = []
    for R in windows:
        mu = boundary_measure(domain, focus, R, density, r_min=rmin, ang_order=ang_order)
        values.append(riesz_difference(mu, x, y))
    values = np.array(values)
    extrap = 2 * values[-1] - values[-2] if len(values) > 1 else values[-1]
    rhs = _grad_u_outside_zero(domain, y, mode, cfg, profile) - _grad_u_outside_zero(domain, x, mode, cfg, profile)
    residual = float(np.linalg.norm(extrap - rhs))
    return ResidualRecord(
        "riesz_green_identity", domain.describe(), [x.tolist(), y.tolist()], residual, tolerance,
        residual <= tolerance,
        {"lhs": extrap.tolist(), "rhs": rhs.tolist(), "windows": list(map(float, windows)),
         "window_values": values.tolist(),
         "tail_change": float(np.linalg.norm(values[-1] - values[-2])) if len(values) > 1 else None})


# ---------------------------------------------------------------------------
# approach regions, principal values and jumps


@dataclass(frozen=True)
class ApproachSpec:
    base: np.ndarray
    direction: np.ndarray
    aperture: float = 0.5
    distances: tuple = (0.04, 0.02, 0.01, 0.005)

    def __post_init__(self):
        if not 0 < self.aperture < 1:
            raise ValueError("aperture must lie in (0, 1)")
        dv = np.asarray(self.direction, float)
        object.__setattr__(self, "direction", dv / np.linalg.norm(dv))
        object.__setattr__(self, "base", np.asarray(self.base, float))
        ds = tuple(float(s) for s in self.distances)
        if any(s <= 0 for s in ds) or any(b >= a for a, b in zip(ds, ds[1:])):
            raise ValueError("distances must be positive and decreasing")
        object.__setattr__(self, "distances", ds)

    def points(self):
        return self.base + np.outer(self.distances, self.direction)

    def side(self, domain: Domain):
        """+1 for an admissible interior approach, -1 for exterior; raises otherwise."""
        sd = domain.signed_distance(self.points())
        s = np.asarray(self.distances)
        if np.all(sd > self.aperture * s):
            return 1
        if np.all(-sd > self.aperture * s):
            return -1
        raise PotentialError("approach leaves the non-tangential cone of the given aperture")


def normal_approaches(domain: Domain, xi, distances=(0.04, 0.02, 0.01, 0.005), aperture=0.5):
    nv = domain.outer_normal(xi)[0]
    return (ApproachSpec(xi, -nv, aperture, distances), ApproachSpec(xi, nv, aperture, distances))


def _linear_limit(s, v):
    """Linear extrapolation to s = 0 from the two smallest distances."""
    s = np.asarray(s, float)
    v = np.asarray(v, float)
    i, j = np.argsort(s)[:2]
    return v[i] - s[i] * (v[j] - v[i]) / (s[j] - s[i])


def bump(center, radius):
    """Smooth bump ``exp(1 - 1/(1 - t^2))`` in ``t = |z - center| / radius``, equal to 1 at the centre."""
    center = np.asarray(center, float)

    def f(z):
        t2 = np.sum((np.atleast_2d(z) - center) ** 2, axis=1) / radius ** 2
        out = np.zeros(len(t2))
        ok = t2 < 1
        out[ok] = np.exp(1.0 - 1.0 / (1.0 - t2[ok]))
        return out

    return f


def _default_ang_order(dim):
    # product sphere rules grow like order^(dim-2); keep tangent rules near 10^3-10^4 nodes
    return {3: 32, 4: 6, 5: 4}[dim]


def _density_measure(domain, xi, f, radius, r_min, breaks=(), order=8, ang_order=None):
    ang_order = ang_order or _default_ang_order(domain.dim)
    if domain.code == HALFSPACE:
        nv = domain.outer_normal(xi)[0]
        t, w = polar_quadrature(domain.dim - 1, r_min, radius, order=order, per_octave=2,
                                ang_order=ang_order, breaks=breaks)
        pts = xi + t @ tangent_basis(nv)
    else:
        pts, w, t = graph_patch_quadrature(domain, xi, radius, r_min, order=order, ang_order=ang_order,
                                           breaks=breaks)
    vals = np.asarray(f(pts), float)
    return EmpiricalMeasure(pts, w * vals, "weighted-surface", meta={"resolution": r_min})


def pv_riesz(f_sigma: EmpiricalMeasure, xi, truncations: Sequence[float]):
    """Truncated sums ``Σ_{|z-ξ|>r} K(ξ - z) f(z) w(z)`` per radius and their linear extrapolation."""
    xi = np.asarray(xi, float)
    rs = np.asarray(truncations, float)
    if np.any(np.diff(rs) >= 0):
        raise PotentialError("truncation radii must decrease")
    res = f_sigma.meta.get("resolution")
    if res is None:
        k = min(len(f_sigma), xi.shape[0] + 1)
        res = float(cKDTree(f_sigma.atoms).query(xi, k=k)[0][-1])
    if rs[-1] < res:
        raise PotentialError("truncation radius below the quadrature resolution")
    dist = np.linalg.norm(f_sigma.atoms - xi, axis=1)
    sums = []
    for r in rs:
        keep = dist > r
        sums.append(_riesz_sum(f_sigma.atoms[keep], f_sigma.weights[keep], xi))
    sums = np.array(sums)
    limit = _linear_limit(rs, sums) if len(rs) > 1 else sums[-1]
    return sums, limit


@dataclass
class JumpReport:
    limit_plus: np.ndarray
    limit_minus: np.ndarray
    expected_jump: np.ndarray
    jump_residual: float
    pv: np.ndarray
    pv_residual_plus: float
    pv_residual_minus: float
    sequences: dict

    def as_dict(self):
        return {"limit_plus": self.limit_plus.tolist(), "limit_minus": self.limit_minus.tolist(),
                "expected_jump": self.expected_jump.tolist(), "jump_residual": self.jump_residual,
                "pv": self.pv.tolist(), "pv_residual_plus": self.pv_residual_plus,
                "pv_residual_minus": self.pv_residual_minus, "sequences": self.sequences}


def jump_relation_check(domain: Domain, xi, f: Optional[Callable] = None, approach=None,
                        support=None, order=8, ang_order=None) -> JumpReport:
    """One-sided limits of ``R(fσ)`` at a smooth boundary point and their jump ``n f(ξ)``.

    ``approach`` is a pair (interior, exterior) of :class:`ApproachSpec`; by
    default both run along the normal.  Residuals are relative to ``|f(ξ)|``
    (absolute when ``f(ξ) = 0``).
    """
    xi = np.asarray(xi, float)
    if domain.is_cone and domain.dist_to_vertex(xi)[0] <= 1e-9 * max(1.0, np.linalg.norm(xi)):
        raise VertexError("jump relations need a smooth boundary point")
    nv = domain.outer_normal(xi)[0]
    if support is None:
        support = 0.5 if domain.code == HALFSPACE else 0.3 * min(1.0, float(domain.dist_to_vertex(xi)[0]))
    f = f or bump(xi, support)
    inner, outer = approach or normal_approaches(domain, xi)
    if inner.side(domain) != 1 or outer.side(domain) != -1:
        raise PotentialError("approach pair must be (interior, exterior)")
    patch = 1.15 * support
    seq = {}
    limits = []
    for name, spec in (("plus", inner), ("minus", outer)):
        vals = []
        for z, s in zip(spec.points(), spec.distances):
            foot = domain.project(z)[0]
            mu = _density_measure(domain, foot, f, patch, s / 16, order=order, ang_order=ang_order)
            vals.append(riesz_at(mu, z))
        vals = np.array(vals)
        seq[name] = {"distances": list(spec.distances), "values": vals.tolist()}
        limits.append(_linear_limit(spec.distances, vals))
    fx = float(f(xi[None, :])[0])
    expected = nv * fx
    scale = abs(fx) if fx != 0 else 1.0
    jump = limits[0] - limits[1]
    truncs = np.array([0.04, 0.02, 0.01, 0.005]) * support / 0.5
    mu = _density_measure(domain, xi, f, patch, truncs[-1] / 8, breaks=tuple(truncs), order=order,
                          ang_order=ang_order)
    _, pv = pv_riesz(mu, xi, truncs)
    return JumpReport(limits[0], limits[1], expected, float(np.linalg.norm(jump - expected)) / scale, pv,
                      float(np.linalg.norm(limits[0] - 0.5 * expected - pv)) / scale,
                      float(np.linalg.norm(limits[1] + 0.5 * expected - pv)) / scale, seq)


# ---------------------------------------------------------------------------
# gradient limits and bounds


def nontangential_gradient_limit_check(domain: Domain, xi, approach: Optional[ApproachSpec] = None,
                                       cfg: Optional[WalkConfig] = None, mode="explicit", h=None,
                                       profile=None, tolerance=1e-3) -> ResidualRecord:
    """Extrapolated limit of ``∇u`` along an interior approach against ``-h(ξ) n(ξ)``."""
    xi = np.asarray(xi, float)
    if domain.is_cone and domain.dist_to_vertex(xi)[0] <= 1e-9 * max(1.0, np.linalg.norm(xi)):
        raise VertexError("gradient limits need a smooth boundary point")
    approach = approach or normal_approaches(domain, xi)[0]
    if approach.side(domain) != 1:
        raise PotentialError("gradient limits need an interior approach")
    vals = np.array([grad_u(domain, z, mode, cfg, profile) for z in approach.points()])
    limit = _linear_limit(approach.distances, vals)
    hval = 1.0 if h is None else float(h(xi[None, :])[0])
    nv = domain.outer_normal(xi)[0]
    res = float(np.linalg.norm(limit + hval * nv))
    return ResidualRecord("nontangential_gradient_limit", domain.describe(), [xi.tolist()], res, tolerance,
                          res <= tolerance, {"limit": limit.tolist(), "h": hval, "values": vals.tolist()})


@dataclass(frozen=True)
class GradientBound:
    gradient_norm: float
    bound: float
    std_error: float
    passed: bool


def gradient_bound_check(domain: Domain, x, cfg: Optional[WalkConfig] = None, mode="explicit", h=None,
                         profile=None) -> GradientBound:
    """``|∇u(x)| ≤ ∫ h dω^x``; with ``h ≡ 1`` the bound is the absorbed mass (1 for built-ins)."""
    x = np.asarray(x, float)
    if domain.signed_distance(x)[0] <= 0:
        raise PotentialError("x must lie in the domain")
    g = float(np.linalg.norm(grad_u(domain, x, mode, cfg, profile)))
    if h is None:
        bound, se = 1.0, 0.0
    else:
        cloud = hit_cloud(domain, x, cfg or WalkConfig())
        vals = np.zeros(int(cloud.meta["walks"]))
        vals[: len(cloud)] = np.asarray(h(cloud.atoms), float)
        bound = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    return GradientBound(g, bound, se, g <= bound + 3 * se + 1e-12)


def gradient_bound_sweep(domain: Domain, points, profile=None, error=1e-6):
    """Max of ``|∇u|`` (explicit mode) over interior points against the bound ``1 + 3 error``."""
    from .cones import explicit_solution

    sol = explicit_solution(domain, profile)
    pts = np.atleast_2d(points)
    inside = domain.signed_distance(pts) > 0
    norms = np.linalg.norm(sol.gradient(pts[inside]), axis=1)
    worst = float(norms.max()) if len(norms) else 0.0
    return {"max_gradient": worst, "bound": 1.0 + 3 * error, "samples": int(inside.sum()),
            "pass": worst <= 1.0 + 3 * error}
