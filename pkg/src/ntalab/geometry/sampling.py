"""Boundary sampling with surface-measure weights."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ..rng import generator
from .domains import BLOCKCONE, GRAPH, HALFSPACE, Domain, DomainError, _fd_gradient
from .quadrature import ball_volume, sphere_area, tangent_basis


class EmptyWindowError(DomainError):
    """The window does not meet the boundary."""


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    std_error: float
    samples: int

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "std_error", float(self.std_error))
        object.__setattr__(self, "samples", int(self.samples))
        if self.std_error < 0 or self.samples < 1:
            raise ValueError("std_error must be >= 0 and samples >= 1")

    def as_dict(self):
        return {"value": self.value, "std_error": self.std_error, "samples": self.samples}


@dataclass(frozen=True)
class BoundarySamples:
    """Weighted boundary points: ``sum(weights)`` estimates H^n(∂Ω ∩ window)."""

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    area: MeasureEstimate
    center: np.ndarray
    radius: float

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        for p, n, w in zip(self.points, self.normals, self.weights):
            yield p, n, w

    def to_csv(self, path):
        d = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"x{i + 1}" for i in range(d)] + [f"n{i + 1}" for i in range(d)] + ["weight"])
            for p, n, w in self:
                wr.writerow([repr(float(v)) for v in p] + [repr(float(v)) for v in n] + [repr(float(w))])


def sample_boundary(domain: Domain, center, radius, count, seed=0) -> BoundarySamples:
    """Samples of ∂Ω ∩ B(center, radius), uniform w.r.t. surface measure.

    Analytic kinds are sampled through exact parametrizations (rejection in
    parameter space); generic implicit domains use sign changes along a grid
    of coordinate lines with Crofton-type weights, so ``count`` is only a
    target there.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, float)
    yc = domain.to_base(center)
    R = domain.scale * radius
    rng = generator(seed, 0x5A)
    if domain.code == HALFSPACE:
        y, w, est = _halfspace_samples(domain, yc, R, count, rng)
    elif domain.code == BLOCKCONE:
        y, w, est = _cone_samples(domain, yc, R, count, rng)
    elif domain.code == GRAPH:
        y, w, est = _graph_samples(domain, yc, R, count, rng)
    else:
        y, w, est = _crofton_samples(domain, yc, R, count, rng)
    n = domain.dim - 1
    factor = domain.scale ** (-n)
    pts = domain.from_base(y)
    normals = domain.outer_normal(pts, check_vertex=False)
    area = MeasureEstimate(est.value * factor, est.std_error * factor, est.samples)
    return BoundarySamples(pts, normals, w * factor, area, center, float(radius))


def surface_measure(domain, center, radius, count=10_000, seed=0) -> MeasureEstimate:
    """H^n(∂Ω ∩ B(center, radius)) with a standard error."""
    return sample_boundary(domain, center, radius, count, seed).area


def _unit_vectors(rng, n, dim):
    g = rng.standard_normal((n, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _halfspace_samples(domain, yc, R, count, rng):
    off, nv = domain.params[0], domain.params[1:]
    delta = yc @ nv - off
    if abs(delta) >= R:
        raise EmptyWindowError("window does not meet the hyperplane")
    rho = math.sqrt(R * R - delta * delta)
    n = domain.dim - 1
    basis = tangent_basis(nv)
    t = _unit_vectors(rng, count, n) * (rho * rng.random(count) ** (1.0 / n))[:, None]
    foot = yc - delta * nv
    area = ball_volume(n) * rho ** n
    return foot + t @ basis, np.full(count, area / count), MeasureEstimate(area, 0.0, count)


def _cap_sampler(j, c, R):
    """Sampler and measure for unit vectors in S^{j-1} that can reach B(c, R) radially."""
    cn = float(np.linalg.norm(c))
    alpha = math.asin(min(1.0, R / cn)) if cn > R else math.pi
    cdir = c / cn if cn > 0 else np.eye(j)[0]
    if j == 1:
        if alpha < math.pi / 2:
            s = 1.0 if cdir[0] > 0 else -1.0
            return (lambda rng, n: np.full((n, 1), s)), 1.0
        return (lambda rng, n: np.where(rng.random((n, 1)) < 0.5, 1.0, -1.0)), 2.0
    if j == 2:
        phic = math.atan2(cdir[1], cdir[0])

        def s2(rng, n):
            ph = phic + alpha * (2 * rng.random(n) - 1)
            return np.stack([np.cos(ph), np.sin(ph)], axis=1)

        return s2, 2 * alpha
    if j == 3:
        ca = math.cos(alpha)
        # rotation taking e3 to cdir
        tb = tangent_basis(cdir)
        rot = np.stack([tb[0], tb[1], cdir], axis=1)

        def s3(rng, n):
            z = ca + (1 - ca) * rng.random(n)
            ph = 2 * math.pi * rng.random(n)
            s = np.sqrt(np.maximum(0.0, 1 - z * z))
            v = np.stack([s * np.cos(ph), s * np.sin(ph), z], axis=1)
            return v @ rot.T

        return s3, 2 * math.pi * (1 - ca)
    return (lambda rng, n: _unit_vectors(rng, n, j)), sphere_area(j)


def _cone_samples(domain, yc, R, count, rng):
    k, m, t0 = int(domain.params[0]), int(domain.params[1]), domain.params[2]
    extra = domain.dim - m
    cbase = yc[:m]
    cr = float(np.linalg.norm(cbase))
    r_lo, r_hi = max(0.0, cr - R), cr + R
    samp_a, meas_a = _cap_sampler(k, cbase[:k], R)
    samp_b, meas_b = _cap_sampler(m - k, cbase[k:m], R)
    jac = math.cos(t0) ** (k - 1) * math.sin(t0) ** (m - k - 1)
    q = m - 1
    A = jac * meas_a * meas_b * (r_hi ** q - r_lo ** q) / q
    if extra:
        A *= ball_volume(extra) * R ** extra

    def propose(n):
        r = (r_lo ** q + rng.random(n) * (r_hi ** q - r_lo ** q)) ** (1.0 / q)
        a = samp_a(rng, n)
        b = samp_b(rng, n)
        y = np.empty((n, domain.dim))
        y[:, :k] = (r * math.cos(t0))[:, None] * a
        y[:, k:m] = (r * math.sin(t0))[:, None] * b
        if extra:
            y[:, m:] = yc[m:] + _unit_vectors(rng, n, extra) * (R * rng.random(n) ** (1.0 / extra))[:, None]
        return y, np.ones(n)

    return _rejection(propose, yc, R, count, A)


def _graph_samples(domain, yc, R, count, rng):
    a, kf = domain.params
    d = domain.dim
    A = ball_volume(d - 1) * R ** (d - 1)

    def propose(n):
        y = np.empty((n, d))
        y[:, :-1] = yc[:-1] + _unit_vectors(rng, n, d - 1) * (R * rng.random(n) ** (1.0 / (d - 1)))[:, None]
        y[:, -1] = a * np.cos(kf * y[:, 0])
        return y, np.sqrt(1.0 + (a * kf * np.sin(kf * y[:, 0])) ** 2)

    return _rejection(propose, yc, R, count, A)


def _rejection(propose, yc, R, count, A, max_rounds=200):
    got_y, got_j = [], []
    accepted = 0
    proposed = 0
    batch = max(4 * count, 1024)
    sum_j = 0.0
    sum_j2 = 0.0
    for _ in range(max_rounds):
        y, jac = propose(batch)
        inside = np.sum((y - yc) ** 2, axis=1) < R * R
        idx = np.flatnonzero(inside)
        need = count - accepted
        if len(idx) >= need:
            cut = idx[need - 1] + 1
            jj = np.where(inside[:cut], jac[:cut], 0.0)
            proposed += cut
            sum_j += jj.sum()
            sum_j2 += (jj * jj).sum()
            got_y.append(y[idx[:need]])
            got_j.append(jac[idx[:need]])
            accepted = count
            break
        jj = np.where(inside, jac, 0.0)
        proposed += batch
        sum_j += jj.sum()
        sum_j2 += (jj * jj).sum()
        got_y.append(y[idx])
        got_j.append(jac[idx])
        accepted += len(idx)
        if proposed >= 4 * batch and accepted == 0:
            break
    if accepted < count:
        if accepted == 0:
            raise EmptyWindowError("window does not meet the boundary")
    y = np.concatenate(got_y)
    jac = np.concatenate(got_j)
    mean = sum_j / proposed
    var = max(sum_j2 / proposed - mean * mean, 0.0)
    area = A * mean
    se = A * math.sqrt(var / proposed)
    w = jac * (area / jac.sum())
    return y, w, MeasureEstimate(area, se, len(w))


def _crofton_samples(domain, yc, R, count, rng):
    d = domain.dim
    n = d - 1
    h = R * (ball_volume(n) * d * 0.6 / count) ** (1.0 / n)
    fn = domain.fn
    pts, ws, parity = [], [], []
    for j in range(d):
        others = [i for i in range(d) if i != j]
        off = rng.random(n) * h
        axes = [np.arange(-R + off[i], R, h) for i in range(n)]
        grids = np.meshgrid(*axes, indexing="ij")
        q = np.stack([g.ravel() for g in grids], axis=1)
        keep = np.sum(q * q, axis=1) < R * R
        q = q[keep]
        par = (np.sum(np.stack([np.round((g.ravel()[keep] + R - off[i]) / h) for i, g in enumerate(grids)]),
                      axis=0) % 2).astype(int)
        half = np.sqrt(R * R - np.sum(q * q, axis=1))
        nt = max(16, int(math.ceil(8 * R / h)))
        s = np.linspace(-1.0, 1.0, nt)
        line = np.empty((len(q), nt, d))
        line[:, :, j] = yc[j] + half[:, None] * s[None, :]
        for a, i in enumerate(others):
            line[:, :, i] = yc[i] + q[:, a, None]
        vals = np.asarray(fn(line.reshape(-1, d)), float).reshape(len(q), nt)
        li, si = np.nonzero(np.sign(vals[:, :-1]) * np.sign(vals[:, 1:]) < 0)
        if len(li) == 0:
            continue
        lo = line[li, si].copy()
        hi = line[li, si + 1].copy()
        flo = vals[li, si]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = np.asarray(fn(mid), float)
            left = np.sign(fm) == np.sign(flo)
            lo = np.where(left[:, None], mid, lo)
            flo = np.where(left, fm, flo)
            hi = np.where(left[:, None], hi, mid)
        y = 0.5 * (lo + hi)
        g = _fd_gradient(fn, y, 1e-7 * max(1.0, R))
        nrm = g / np.linalg.norm(g, axis=1, keepdims=True)
        pts.append(y)
        ws.append(h ** n * np.abs(nrm[:, j]))
        parity.append(par[li])
    if not pts:
        raise EmptyWindowError("window does not meet the boundary")
    y = np.concatenate(pts)
    w = np.concatenate(ws)
    par = np.concatenate(parity)
    area = float(w.sum())
    se = abs(2 * w[par == 0].sum() - 2 * w[par == 1].sum()) / 2
    return y, w, MeasureEstimate(area, se, len(w))
