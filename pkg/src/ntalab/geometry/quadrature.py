"""Deterministic quadrature rules: spheres, polar discs, cone and graph patches."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gamma

from .domains import BLOCKCONE, HALFSPACE, Domain


def sphere_area(dim):
    """H^{dim-1} measure of the unit sphere in R^dim."""
    return 2.0 * math.pi ** (dim / 2) / gamma(dim / 2)


def ball_volume(dim):
    return math.pi ** (dim / 2) / gamma(dim / 2 + 1)


def gauss_panels(a, b, panels, order):
    """Composite Gauss-Legendre nodes/weights on [a, b] with equal panels."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    return _panel_rule(edges, x, w)


def graded_panels(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    return _panel_rule(np.asarray(edges, float), x, w)


def _panel_rule(edges, x, w):
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


@lru_cache(maxsize=64)
def _sphere_rule(dim, order):
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        m = 4 * order
        t = 2 * math.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(t), np.sin(t)], axis=1), np.full(m, 2 * math.pi / m)
    # y = (cos(th) a, sin(th) b), a in S^{k-1}, b in S^{l-1}; density cos^{k-1} sin^{l-1}
    k = dim - 1 if dim == 3 else (dim + 1) // 2
    l = dim - k
    pa, wa = _sphere_rule(k, order)
    pb, wb = _sphere_rule(l, order)
    th, wt = gauss_panels(0.0, math.pi / 2, max(2, order // 2), order)
    wt = wt * np.cos(th) ** (k - 1) * np.sin(th) ** (l - 1)
    T, A, B = np.meshgrid(np.arange(len(th)), np.arange(len(wa)), np.arange(len(wb)), indexing="ij")
    T, A, B = T.ravel(), A.ravel(), B.ravel()
    pts = np.concatenate([np.cos(th)[T, None] * pa[A], np.sin(th)[T, None] * pb[B]], axis=1)
    return pts, wt[T] * wa[A] * wb[B]


def sphere_quadrature(dim, order=16):
    """Product rule on S^{dim-1}: nodes (M, dim) and weights summing to its area.

    Coordinates split R^dim into two blocks (``(x1, x2 | x3)`` in R^3 and
    ``(x1, x2 | x3, x4)`` in R^4), so functions that only depend on the
    angle between blocks are integrated with a kink-free Gauss rule.
    """
    pts, w = _sphere_rule(int(dim), int(order))
    return pts.copy(), w.copy()


def polar_quadrature(n, r_min, r_max, order=8, per_octave=1, ang_order=16, breaks=()):
    """Rule on the n-ball of radius r_max centred at 0, graded geometrically from r_min.

    Returns nodes (M, n) and weights.  The inner disc of radius r_min gets a
    single panel; extra radii in ``breaks`` become panel edges so truncations
    at those radii are exact.
    """
    octaves = max(1, int(math.ceil(math.log2(r_max / r_min))))
    edges = list(r_min * 2.0 ** (np.arange(octaves * per_octave + 1) / per_octave))
    edges = [e for e in edges if e < r_max] + [r_max]
    edges = sorted(set([0.0] + edges + [b for b in breaks if 0 < b < r_max]))
    rho, wr = graded_panels(edges, order)
    dirs, wd = sphere_quadrature(n, ang_order) if n > 1 else (np.array([[1.0], [-1.0]]), np.ones(2))
    pts = (rho[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    w = (wr * rho ** (n - 1))[:, None] * wd[None, :]
    return pts, w.ravel()


def tangent_basis(normal):
    """Orthonormal basis (rows) of the hyperplane orthogonal to ``normal``."""
    normal = np.asarray(normal, float)
    d = len(normal)
    q, _ = np.linalg.qr(np.column_stack([normal, np.eye(d)]))
    basis = q[:, 1:d].T
    return basis


def graph_patch_quadrature(domain: Domain, xi, radius, r_min, order=8, ang_order=16, breaks=()):
    """Surface rule on ∂Ω near a smooth point ``xi`` as a graph over its tangent plane.

    Each planar node ``xi + t`` is lifted along the normal to the boundary;
    the area factor is ``1 / |n(y) . n(xi)|``.  Returns (points, weights,
    tangent coordinates).
    """
    xi = np.asarray(xi, float)
    n0 = domain.outer_normal(xi)[0]
    basis = tangent_basis(n0)
    t, w = polar_quadrature(domain.dim - 1, r_min, radius, order=order, ang_order=ang_order,
                            breaks=breaks)
    base = xi + t @ basis
    pts = lift_along(domain, base, n0)
    nrm = domain.outer_normal(pts, check_vertex=False)
    w = w / np.abs(nrm @ n0)
    return pts, w, t


def lift_along(domain, base, direction, iterations=30):
    """Solve sd(base + h * direction) = 0 for h, starting from h = 0 (secant iterations)."""
    h0 = np.zeros(len(base))
    f0 = domain.signed_distance(base)
    h1 = f0.copy()  # sd decreases along the outer normal at unit rate for flat boundaries
    f1 = domain.signed_distance(base + h1[:, None] * direction)
    for _ in range(iterations):
        denom = f1 - f0
        ok = np.abs(denom) > 1e-300
        h2 = np.where(ok, h1 - f1 * (h1 - h0) / np.where(ok, denom, 1.0), h1)
        h0, f0 = h1, f1
        h1 = h2
        f1 = domain.signed_distance(base + h1[:, None] * direction)
        if np.max(np.abs(f1)) < 1e-15:
            break
    return base + h1[:, None] * direction


def cone_quadrature(domain: Domain, r_max, r_min=1e-3, order=8, ang_order=32):
    """Parametric rule on a block cone boundary truncated at |y| < r_max (base frame radius).

    The boundary is ``r (cos t0 a, sin t0 b)``, with area element
    ``r^{m-2} cos^{k-1} t0 sin^{m-k-1} t0 dr dS(a) dS(b)``.  Only unrescaled
    cones without product factors are supported.
    """
    if domain.code != BLOCKCONE or int(domain.meta.get("extra_dims", 0)) != 0:
        raise ValueError("cone_quadrature needs a block cone without product factors")
    k, m, t0 = int(domain.params[0]), int(domain.params[1]), domain.params[2]
    r, wr = polar_radial(r_min, r_max, order)
    pa, wa = sphere_quadrature(k, ang_order) if k > 1 else (np.array([[1.0], [-1.0]]), np.ones(2))
    pb, wb = sphere_quadrature(m - k, ang_order) if m - k > 1 else (np.array([[1.0], [-1.0]]), np.ones(2))
    R, A, B = np.meshgrid(np.arange(len(r)), np.arange(len(wa)), np.arange(len(wb)), indexing="ij")
    R, A, B = R.ravel(), A.ravel(), B.ravel()
    y = np.concatenate([(r[R] * math.cos(t0))[:, None] * pa[A], (r[R] * math.sin(t0))[:, None] * pb[B]],
                       axis=1)
    jac = math.cos(t0) ** (k - 1) * math.sin(t0) ** (m - k - 1)
    w = wr[R] * r[R] ** (m - 2) * jac * wa[A] * wb[B]
    pts = domain.from_base(y)
    return pts, w / domain.scale ** (domain.dim - 1)


def polar_radial(r_min, r_max, order=8):
    octaves = max(1, int(math.ceil(math.log2(r_max / r_min))))
    edges = [0.0] + [min(r_min * 2.0 ** i, r_max) for i in range(octaves + 1)]
    edges = sorted(set(edges))
    return graded_panels(edges, order)


def halfspace_quadrature(domain: Domain, focus, radius, r_min, order=8, ang_order=32, breaks=()):
    """Polar rule on the hyperplane of a half-space, centred at ``focus`` (projected)."""
    if domain.code != HALFSPACE:
        raise ValueError("halfspace_quadrature needs a half-space")
    foot = domain.project(np.asarray(focus, float))[0]
    n0 = domain.outer_normal(foot)[0]
    basis = tangent_basis(n0)
    t, w = polar_quadrature(domain.dim - 1, r_min, radius, order=order, ang_order=ang_order, breaks=breaks)
    return foot + t @ basis, w
