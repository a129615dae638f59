"""Flatness certificates: two-sided plane excess, one-sided beta, corkscrew witnesses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .domains import Domain, VertexError
from .quadrature import tangent_basis
from .sampling import sample_boundary

GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class Plane:
    base: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        nv = np.asarray(self.normal, float)
        norm = np.linalg.norm(nv)
        if norm == 0:
            raise ValueError("plane normal must be nonzero")
        object.__setattr__(self, "normal", nv / norm)
        object.__setattr__(self, "base", np.asarray(self.base, float))

    def distance(self, x):
        return np.abs((np.atleast_2d(x) - self.base) @ self.normal)

    def scaled(self, lam, about=None):
        about = np.zeros_like(self.base) if about is None else np.asarray(about, float)
        return Plane(about + lam * (self.base - about), self.normal)


@dataclass(frozen=True)
class FlatnessReport:
    center: np.ndarray
    radius: float
    plane: Plane
    theta: float
    beta: float
    sample_count: int
    max_gap_bound: float

    def as_dict(self):
        return {"center": self.center.tolist(), "radius": self.radius, "theta": self.theta,
                "beta": self.beta, "normal": self.plane.normal.tolist(),
                "plane_base": self.plane.base.tolist(), "sample_count": self.sample_count,
                "max_gap_bound": self.max_gap_bound}


class BoundaryPatch:
    """Boundary samples of ∂Ω ∩ B(x, r) reused across many plane evaluations.

    Interior samples come from :func:`sample_boundary`; they are supplemented
    by points of ∂Ω ∩ ∂B(x, r) (alternating projections), where one-sided
    excesses usually peak.
    """

    def __init__(self, domain: Domain, x, r, count=3000, seed=0):
        self.domain = domain
        self.x = np.asarray(x, float)
        self.r = float(r)
        bs = sample_boundary(domain, self.x, r, count, seed)
        self.weights = bs.weights
        edge = _edge_points(domain, self.x, r, bs.points)
        self.points = np.concatenate([bs.points, edge]) if len(edge) else bs.points
        self.interior_count = len(bs.points)
        if len(self.points) > 1:
            dd, _ = cKDTree(self.points).query(self.points, k=2)
            self.gap = float(np.max(dd[:, 1]))
        else:
            self.gap = self.r

    def beta(self, plane: Plane):
        return float(np.max(plane.distance(self.points))) / self.r


def _edge_points(domain, x, r, pts, iterations=12):
    v = pts - x
    nv = np.linalg.norm(v, axis=1)
    ok = nv > 1e-12 * r
    z = x + r * v[ok] / nv[ok, None]
    for _ in range(iterations):
        z = domain.project(z)
        w = z - x
        nw = np.linalg.norm(w, axis=1)
        good = nw > 1e-12 * r
        z = z[good]
        z = x + r * (w[good] / nw[good, None])
    z = domain.project(z)
    d = np.linalg.norm(z - x, axis=1)
    keep = (d <= r * (1 + 1e-9)) & (np.abs(domain.signed_distance(z)) <= 1e-8 * max(r, 1.0))
    return z[keep]


def plane_disc_points(plane: Plane, x, r, per_axis=16, edge=2000):
    """Lattice points of plane ∩ B(x, r) plus points on its rim; None if empty."""
    nv = plane.normal
    dist = float((x - plane.base) @ nv)
    if abs(dist) >= r:
        return None, 0.0
    foot = x - dist * nv
    rho = math.sqrt(r * r - dist * dist)
    basis = tangent_basis(nv)
    n = len(nv) - 1
    h = 2 * rho / per_axis
    axes = [np.arange(-rho + h / 2, rho, h)] * n
    g = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    g = g[np.sum(g * g, axis=1) <= rho * rho]
    # deterministic quasi-uniform rim points
    k = np.arange(edge) + 0.5
    if n == 1:
        rim = np.array([[-rho], [rho]])
    elif n == 2:
        t = 2 * math.pi * k / edge
        rim = rho * np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        rim = rho * _fibonacci_sphere(edge, n)
    t = np.concatenate([g, rim])
    return foot + t @ basis, h * math.sqrt(n) / 2


def _fibonacci_sphere(m, n):
    k = np.arange(m) + 0.5
    if n == 3:
        z = 1 - 2 * k / m
        ph = math.pi * (1 + math.sqrt(5)) * k
        s = np.sqrt(1 - z * z)
        return np.stack([s * np.cos(ph), s * np.sin(ph), z], axis=1)
    # Halton-like fallback for higher dimensions
    rng = np.random.default_rng(12345)
    v = rng.standard_normal((m, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _theta_for(patch: BoundaryPatch, plane: Plane, per_axis):
    b = patch.beta(plane)
    pts, grid_gap = plane_disc_points(plane, patch.x, patch.r, per_axis)
    if pts is None:
        return math.inf, b, grid_gap
    s = float(np.max(np.abs(patch.domain.signed_distance(pts)))) / patch.r
    return max(b, s), b, grid_gap


def flatness_theta(domain: Domain, x, r, plane: Plane, count=3000, seed=0, per_axis=16,
                   patch: Optional[BoundaryPatch] = None) -> FlatnessReport:
    """Two-sided normalized excess Θ(x, r, P) between ∂Ω ∩ B(x,r) and P ∩ B(x,r)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, float)
    if float(plane.distance(x)[0]) > r:
        raise ValueError("plane must pass within r of x")
    patch = patch or BoundaryPatch(domain, x, r, count, seed)
    theta, beta, grid_gap = _theta_for(patch, plane, per_axis)
    gap = max(patch.gap, grid_gap) / r
    return FlatnessReport(x, float(r), plane, float(theta), float(beta), len(patch.points), float(gap))


def beta_number(domain, x, r, plane, count=3000, seed=0, patch=None):
    """One-sided excess r^{-1} sup_{∂Ω ∩ B(x,r)} dist(y, P)."""
    patch = patch or BoundaryPatch(domain, x, r, count, seed)
    return patch.beta(plane)


def _canonical(nv):
    nz = np.flatnonzero(np.abs(nv) > 1e-14)
    if len(nz) and nv[nz[0]] > 0:
        return -nv  # lexicographically smaller representative of ±nv
    return nv


def best_plane(domain: Domain, x, r, count=3000, seed=0, per_axis=16, sweeps=2) -> FlatnessReport:
    """Plane minimizing Θ(x, r, ·): principal-component start, then golden-section
    refinement over rotation angles and offset.  The returned Θ is an upper
    bound for the infimum (up to sampling resolution)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, float)
    patch = BoundaryPatch(domain, x, r, count, seed)
    P = patch.points[: patch.interior_count]
    w = patch.weights / patch.weights.sum()
    mean = w @ P
    cov = (P - mean).T @ ((P - mean) * w[:, None])
    evals, evecs = np.linalg.eigh(cov)
    n0 = _canonical(evecs[:, 0])
    c0 = float((mean - x) @ n0)
    basis = tangent_basis(n0)

    def plane_of(params):
        t, c = params[:-1], params[-1]
        nv = n0 + t @ basis
        nv = nv / np.linalg.norm(nv)
        return Plane(x + c * nv, nv)

    def objective(params):
        return _theta_for(patch, plane_of(params), per_axis)[0]

    params = np.zeros(domain.dim)
    params[-1] = c0
    best = objective(params)
    widths = [0.5, 0.1, 0.02][:sweeps] if sweeps <= 3 else [0.5 / 5 ** i for i in range(sweeps)]
    for width in widths:
        for i in range(domain.dim):
            span = width * (r if i == domain.dim - 1 else 1.0)
            lo, hi = params[i] - span, params[i] + span
            val, arg = _golden(lambda v: objective(_with(params, i, v)), lo, hi, tol=1e-4 * span)
            if val < best:
                best = val
                params = _with(params, i, arg)
    plane = plane_of(params)
    plane = Plane(plane.base, _canonical(plane.normal))
    return flatness_theta(domain, x, r, plane, per_axis=per_axis, patch=patch)


def _with(params, i, v):
    p = params.copy()
    p[i] = v
    return p


def _golden(f, a, b, tol):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (fc, c) if fc < fd else (fd, d)


@dataclass(frozen=True)
class CorkscrewWitness:
    interior: Optional[np.ndarray]
    exterior: Optional[np.ndarray]
    radius: float

    @property
    def ok(self):
        return self.interior is not None and self.exterior is not None


def _probe_points(domain, xi, r, C, per_axis):
    reach = r - r / C
    ax = np.linspace(-reach, reach, per_axis + 1)
    g = np.stack([a.ravel() for a in np.meshgrid(*([ax] * domain.dim), indexing="ij")], axis=1)
    g = g[np.sum(g * g, axis=1) <= reach * reach * (1 + 1e-12)]
    pts = [xi + g]
    try:
        nv = domain.outer_normal(xi)[0]
        t = np.linspace(0, reach, 33)[1:]
        pts += [xi - t[:, None] * nv, xi + t[:, None] * nv]
    except VertexError:
        pass
    return np.concatenate(pts)


def check_corkscrew(domain: Domain, xi, r, C, per_axis=12) -> CorkscrewWitness:
    """Interior/exterior balls of radius r/C inside B(xi, r), by probe-grid search."""
    if r <= 0 or C < 2:
        raise ValueError("need r > 0 and C >= 2")
    xi = np.asarray(xi, float)
    pts = _probe_points(domain, xi, r, C, per_axis)
    sd = domain.signed_distance(pts)
    rad = r / C
    interior = exterior = None
    inner = np.flatnonzero(sd >= rad * (1 - 1e-12))
    if len(inner):
        interior = pts[inner[np.argmax(sd[inner])]]
    outer = np.flatnonzero(-sd >= rad * (1 - 1e-12))
    if len(outer):
        exterior = pts[outer[np.argmin(sd[outer])]]
    return CorkscrewWitness(interior, exterior, rad)


def corkscrew_constant(domain: Domain, xi, r, per_axis=12):
    """Smallest C (on the probe grid) for which both corkscrew balls exist at (xi, r)."""
    xi = np.asarray(xi, float)
    pts = _probe_points(domain, xi, r, 1e9, per_axis)
    sd = domain.signed_distance(pts)
    room = r - np.linalg.norm(pts - xi, axis=1)
    best_in = float(np.max(np.minimum(sd, room)))
    best_out = float(np.max(np.minimum(-sd, room)))
    m = min(best_in, best_out)
    return math.inf if m <= 0 else max(2.0, r / m)
