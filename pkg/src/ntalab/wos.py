"""Walk-on-spheres estimators for harmonic measure and Green functions.

Walk ``j`` draws its randomness from the counter-based stream ``(seed, j)``,
so a batch gives the same hits whatever the worker count or backend order.
The compiled walker handles the analytic kinds; generic implicit domains use
the vectorized numpy walker.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from . import _accel
from ._accel import njit, prange
from .geometry.domains import IMPLICIT, Domain, DomainError, distance_point
from .geometry.quadrature import sphere_area
from .geometry.sampling import MeasureEstimate, sample_boundary
from .rng import stream_key, stream_keys, uniform_open, uniforms


class WalkError(ValueError):
    """Invalid start point or walk configuration."""


@dataclass(frozen=True)
class WalkConfig:
    eps_shell: float = 1e-4
    max_steps: int = 10_000
    step_fraction: float = 1.0
    seed: int = 0
    walks: int = 10_000
    threads: Optional[int] = None

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise WalkError("; ".join(errors))

    def problems(self):
        out = []
        if not self.eps_shell > 0:
            out.append("eps_shell > 0")
        if self.max_steps < 1:
            out.append("max_steps ≥ 1")
        if not 0 < self.step_fraction <= 1:
            out.append("step_fraction in (0, 1]")
        if self.walks < 1:
            out.append("walks ≥ 1")
        if not 0 <= self.seed < 2 ** 64:
            out.append("seed must be a 64-bit unsigned integer")
        return out

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class HitRecord:
    hit: np.ndarray
    steps: int
    truncated: bool


@dataclass(frozen=True)
class WalkBatch:
    """Outcome of a batch of walks; ``hits`` rows of truncated walks hold the last position."""

    hits: np.ndarray
    steps: np.ndarray
    truncated: np.ndarray
    first_index: int = 0

    def __len__(self):
        return len(self.steps)

    def __getitem__(self, i):
        return HitRecord(self.hits[i], int(self.steps[i]), bool(self.truncated[i]))

    @property
    def truncation_rate(self):
        return float(np.mean(self.truncated))


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted boundary atoms approximating a harmonic, weighted-surface or surface measure."""

    atoms: np.ndarray
    weights: np.ndarray
    kind: str = "harmonic"
    truncated: int = 0
    meta: dict = field(default_factory=dict)

    KINDS = ("harmonic", "weighted-surface", "surface")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"kind must be one of {self.KINDS}")
        if len(self.atoms) != len(self.weights):
            raise ValueError("atoms and weights differ in length")
        if self.kind != "weighted-surface" and np.any(self.weights < 0):
            raise ValueError("weights must be non-negative (signed densities use kind 'weighted-surface')")

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)

    def restrict(self, mask):
        return EmpiricalMeasure(self.atoms[mask], self.weights[mask], self.kind, self.truncated, self.meta)

    def to_csv(self, path):
        d = self.atoms.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(d)] + ["weight"])
            for a, wt in zip(self.atoms, self.weights):
                w.writerow([repr(float(v)) for v in a] + [repr(float(wt))])

    @classmethod
    def from_samples(cls, samples, density=None):
        """Surface measure (or ``density * sigma``) from :class:`BoundarySamples`."""
        w = samples.weights.copy()
        kind = "surface"
        if density is not None:
            w = w * np.asarray(density(samples.points), float)
            kind = "weighted-surface"
        return cls(samples.points, w, kind)


# ---------------------------------------------------------------------------
# kernels


@njit(parallel=True)
def _walk_kernel(code, params, shift, scale, starts, reps, seed, first, eps, max_steps, frac,
                 out, steps, trunc):
    n, d = out.shape
    npair = (d + 1) // 2
    per_step = 2 * npair
    for j in prange(n):
        key = stream_key(seed, first + np.uint64(j))
        x = starts[j // reps].copy()
        g = np.empty(2 * npair)
        s = 0
        while True:
            dist = distance_point(code, params, shift, scale, x)
            if dist <= eps:
                break
            if s >= max_steps:
                trunc[j] = True
                break
            base = s * per_step
            for q in range(npair):
                u1 = uniform_open(key, base + 2 * q)
                u2 = uniform_open(key, base + 2 * q + 1)
                rr = math.sqrt(-2.0 * math.log(u1))
                g[2 * q] = rr * math.cos(2.0 * math.pi * u2)
                g[2 * q + 1] = rr * math.sin(2.0 * math.pi * u2)
            nrm = 0.0
            for i in range(d):
                nrm += g[i] * g[i]
            step = frac * dist / math.sqrt(nrm)
            for i in range(d):
                x[i] += step * g[i]
            s += 1
        steps[j] = s
        for i in range(d):
            out[j, i] = x[i]


def _walk_numpy(dist_fn, starts, reps, seed, first, eps, max_steps, frac):
    n_start, d = starts.shape
    n = n_start * reps
    x = np.repeat(starts, reps, axis=0)
    keys = stream_keys(seed, np.arange(first, first + n, dtype=np.uint64))
    steps = np.zeros(n, np.int64)
    trunc = np.zeros(n, bool)
    active = np.arange(n)
    npair = (d + 1) // 2
    s = 0
    while len(active):
        dist = dist_fn(x[active])
        live = dist > eps
        active, dist = active[live], dist[live]
        if s >= max_steps:
            trunc[active] = True
            break
        if not len(active):
            break
        k = keys[active]
        g = np.empty((len(active), 2 * npair))
        base = s * 2 * npair
        for q in range(npair):
            u1 = uniforms(k, base + 2 * q)
            u2 = uniforms(k, base + 2 * q + 1)
            rr = np.sqrt(-2.0 * np.log(u1))
            g[:, 2 * q] = rr * np.cos(2.0 * np.pi * u2)
            g[:, 2 * q + 1] = rr * np.sin(2.0 * np.pi * u2)
        g = g[:, :d]
        x[active] += (frac * dist / np.linalg.norm(g, axis=1))[:, None] * g
        s += 1
        steps[active] = s
    return x, steps, trunc


def run_walks(domain: Domain, starts, cfg: WalkConfig, reps=None, first_index=0, project=True,
              check=True) -> WalkBatch:
    """Run ``reps`` walks from each row of ``starts`` (default ``cfg.walks`` from a single start).

    Walk ``j`` of the batch uses stream ``first_index + j``.
    """
    starts = np.atleast_2d(np.asarray(starts, float))
    if starts.shape[1] != domain.dim:
        raise WalkError("start dimension does not match the domain")
    reps = cfg.walks if reps is None else int(reps)
    if check:
        sd = domain.distance_bound(starts)
        if np.any(sd <= 0):
            raise WalkError("start point outside the domain")
        if np.any(sd <= cfg.eps_shell):
            raise WalkError("start point inside the absorption shell")
    n = len(starts) * reps
    if _accel.HAVE_NUMBA and domain.code != IMPLICIT:
        _accel.set_threads(cfg.threads)
        out = np.empty((n, domain.dim))
        steps = np.zeros(n, np.int64)
        trunc = np.zeros(n, np.bool_)
        _walk_kernel(domain.code, domain.params, domain.shift, float(domain.scale), starts, reps,
                     np.uint64(cfg.seed), np.uint64(first_index), float(cfg.eps_shell),
                     int(cfg.max_steps), float(cfg.step_fraction), out, steps, trunc)
    else:
        out, steps, trunc = _walk_numpy(domain.distance_bound, starts, reps, cfg.seed, first_index,
                                        cfg.eps_shell, cfg.max_steps, cfg.step_fraction)
    if project:
        ok = ~trunc
        if np.any(ok):
            out[ok] = domain.project(out[ok])
    return WalkBatch(out, steps, trunc, first_index)


def walk_to_boundary(domain: Domain, start, cfg: WalkConfig, walk_index=0) -> HitRecord:
    """One walk; deterministic in ``(cfg.seed, walk_index)``."""
    return run_walks(domain, start, cfg, reps=1, first_index=walk_index)[0]


# ---------------------------------------------------------------------------
# harmonic measure


def hit_cloud(domain: Domain, pole, cfg: WalkConfig) -> EmpiricalMeasure:
    """Atoms at the hits of ``cfg.walks`` walks from ``pole``, each of weight ``1/walks``."""
    batch = run_walks(domain, pole, cfg)
    ok = ~batch.truncated
    w = np.full(int(ok.sum()), 1.0 / cfg.walks)
    return EmpiricalMeasure(batch.hits[ok], w, "harmonic", int((~ok).sum()),
                            {"pole": np.asarray(pole, float).tolist(), "walks": cfg.walks,
                             "seed": cfg.seed, "mean_steps": float(batch.steps.mean())})


def harmonic_measure(domain: Domain, pole, indicator: Callable, cfg: Optional[WalkConfig] = None,
                     cloud: Optional[EmpiricalMeasure] = None) -> MeasureEstimate:
    """Fraction of walks from ``pole`` absorbed in ``{indicator}`` with its binomial standard error.

    Truncated walks count as misses; ``indicator`` maps an (N, d) array of hits to booleans.
    """
    cfg = cfg or WalkConfig()
    cloud = cloud if cloud is not None else hit_cloud(domain, pole, cfg)
    walks = int(cloud.meta.get("walks", cfg.walks))
    if len(cloud) == 0:
        return MeasureEstimate(0.0, 0.0, walks)
    inside = np.asarray(indicator(cloud.atoms), bool)
    p = float(np.count_nonzero(inside)) / walks
    return MeasureEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / walks), walks)


def ball_indicator(center, radius):
    center = np.asarray(center, float)
    return lambda z: np.linalg.norm(np.atleast_2d(z) - center, axis=1) < radius


# ---------------------------------------------------------------------------
# Green functions


def fundamental_solution(x, dim=None):
    """``E(x) = 1 / ((d-2) |S^{d-1}| |x|^{d-2})`` with ``-ΔE = δ``."""
    x = np.atleast_2d(np.asarray(x, float))
    d = x.shape[1] if dim is None else dim
    r = np.linalg.norm(x, axis=1)
    return 1.0 / ((d - 2) * sphere_area(d) * r ** (d - 2))


def _e_difference(a, b, d):
    """``E(a) - E(b)`` for rows of ``a`` and ``b`` without cancellation."""
    ra2 = np.sum(a * a, axis=1)
    rb2 = np.sum(b * b, axis=1)
    diff2 = np.sum((b - a) * (b + a), axis=1)  # |b|^2 - |a|^2
    c = 1.0 / ((d - 2) * sphere_area(d))
    if d == 4:
        return c * diff2 / (ra2 * rb2)
    ra, rb = np.sqrt(ra2), np.sqrt(rb2)
    dr = diff2 / (ra + rb)
    if d == 3:
        return c * dr / (ra * rb)
    # d = 5: (rb^3 - ra^3) / (ra^3 rb^3)
    return c * dr * (ra2 + ra * rb + rb2) / (ra2 * ra * rb2 * rb)


def green_representation(cloud: EmpiricalMeasure, x, pole) -> MeasureEstimate:
    """``E(x - p) - ∫ E(x - z) dω^p(z)`` for any ``x ≠ p`` (vanishes off the closure of Ω)."""
    x = np.asarray(x, float)
    pole = np.asarray(pole, float)
    walks = int(cloud.meta.get("walks", len(cloud)))
    d = x.shape[0]
    terms = np.zeros(walks)
    a = np.broadcast_to(x - pole, cloud.atoms.shape)
    terms[: len(cloud)] = _e_difference(a, x - cloud.atoms, d)
    # truncated walks contribute E(x - p) (their mass is missing from the cloud)
    terms[len(cloud):] = float(fundamental_solution(x - pole, d)[0])
    return MeasureEstimate(float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(walks)) if walks > 1 else 0.0,
                           walks)


def _check_pair(domain, x, p):
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    if np.linalg.norm(x - p) == 0:
        raise WalkError("coincident points")
    sd = domain.distance_bound(np.stack([x, p]))
    if np.any(sd <= 0):
        raise WalkError("both points must lie in the domain")
    return x, p, sd


def green_finite_pole(domain: Domain, x, p, cfg: WalkConfig, walk_from="near") -> MeasureEstimate:
    """``g(x, p)`` by the representation formula, walking from one of the two points.

    ``walk_from`` is ``"near"`` (the point closer to ∂Ω), ``"far"``, ``"x"`` or ``"p"``;
    ``g`` is symmetric so the choice only affects variance.
    """
    x, p, sd = _check_pair(domain, x, p)
    choice = {"x": 0, "p": 1, "near": int(np.argmin(sd)), "far": int(np.argmax(sd))}[walk_from]
    start, other = (x, p) if choice == 0 else (p, x)
    cloud = hit_cloud(domain, start, cfg)
    return green_representation(cloud, other, start)


def green_at_points(domain: Domain, xs, p, cfg: WalkConfig, first_index=0):
    """``g(x_k, p)`` for many ``x_k`` by walks from each ``x_k``; returns (values, std errors).

    ``p`` may be an (m, d) array of poles, in which case the pole average
    ``(1/m) Σ_j g(x_k, p_j)`` is estimated from the same walks.
    """
    xs = np.atleast_2d(np.asarray(xs, float))
    poles = np.atleast_2d(np.asarray(p, float))
    batch = run_walks(domain, xs, cfg, first_index=first_index)
    d = domain.dim
    n = cfg.walks
    terms = np.zeros(len(batch))
    ok = ~batch.truncated
    src = np.repeat(xs, n, axis=0)
    for q in poles:
        terms[ok] += _e_difference(src[ok] - q, batch.hits[ok] - q, d)
        if np.any(~ok):
            terms[~ok] += fundamental_solution(src[~ok] - q, d)
    terms = terms.reshape(len(xs), n) / len(poles)
    se = terms.std(axis=1, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(xs))
    return terms.mean(axis=1), se


def harmonic_measure_adjoint(domain: Domain, pole, center, radius, cfg: WalkConfig, nodes=24,
                             offset=0.05, seed=None) -> MeasureEstimate:
    """``ω^p(B(center, radius))`` as ``∫_B -∂_n g(y, p) dσ(y)`` for poles far from the ball.

    The normal derivative uses ``(4 g(y + s ν) - g(y + 2 s ν)) / (2 s)`` (second order, ``ν``
    the inward normal, ``s = offset * radius``) with each ``g`` from walks started next to the
    boundary, where walk-on-spheres is cheap; ``σ`` is sampled with ``nodes`` points.
    """
    samples = sample_boundary(domain, center, radius, nodes, cfg.seed if seed is None else seed)
    s = offset * radius
    inward = -samples.normals
    pts = np.concatenate([samples.points + s * inward, samples.points + 2 * s * inward])
    g, se = green_at_points(domain, pts, pole, cfg)
    m = len(samples)
    kern = (4 * g[:m] - g[m:]) / (2 * s)
    kern_se = np.sqrt(16 * se[:m] ** 2 + se[m:] ** 2) / (2 * s)
    w = samples.weights
    value = float(w @ kern)
    mc_se = float(np.sqrt(np.sum((w * kern_se) ** 2)))
    # node-sampling error of the surface average
    q_se = float(samples.area.value * kern.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return MeasureEstimate(value, math.hypot(mc_se, q_se), cfg.walks * 2 * m)


# ---------------------------------------------------------------------------
# pole at infinity


@dataclass(frozen=True)
class RatioMode:
    """``u(x) = g(x, p_far) / g(anchor, p_far)`` (normalization ``u(anchor) = 1``)."""
    p_far: np.ndarray
    anchor: np.ndarray
    walk_from: str = "near"


Mode = Union[str, RatioMode]


def _ratio_check(domain, x, mode):
    p = np.asarray(mode.p_far, float)
    a = np.asarray(mode.anchor, float)
    x = np.asarray(x, float)
    if np.linalg.norm(p - x) < 10 * np.linalg.norm(x - a):
        raise WalkError("p_far too close: need |p_far - x| >= 10 |x - a|")
    return x, p, a


def u_infinity(domain: Domain, x, mode: Mode = "explicit", cfg: Optional[WalkConfig] = None,
               profile=None):
    """The positive harmonic function with pole at infinity, in explicit or ratio mode."""
    x = np.asarray(x, float)
    if mode == "explicit":
        from .cones import explicit_solution

        if domain.code == IMPLICIT:
            raise DomainError("explicit mode is unavailable for generic implicit domains")
        sol = explicit_solution(domain, profile)
        return float(sol.value(x)[0])
    if not isinstance(mode, RatioMode):
        raise ValueError("mode must be 'explicit' or a RatioMode")
    cfg = cfg or WalkConfig()
    x, p, a = _ratio_check(domain, x, mode)
    if domain.distance_bound(x)[0] <= 0:
        return 0.0
    # common random numbers: both Green values use the same walk streams
    num = green_finite_pole(domain, x, p, cfg, mode.walk_from).value
    den = green_finite_pole(domain, a, p, cfg, mode.walk_from).value
    if den <= 0:
        raise WalkError("anchor Green value is not positive at this resolution")
    return num / den


def grad_u(domain: Domain, x, mode: Mode = "explicit", cfg: Optional[WalkConfig] = None,
           profile=None):
    """Gradient of the pole-at-infinity solution: analytic, or central differences of ratio mode."""
    x = np.asarray(x, float)
    if mode == "explicit":
        from .cones import explicit_solution

        if domain.code == IMPLICIT:
            raise DomainError("explicit mode is unavailable for generic implicit domains")
        return explicit_solution(domain, profile).gradient(x)[0]
    dist = float(domain.signed_distance(x)[0])
    h = min(1e-4, dist / 10)
    if dist <= 4 * h:
        raise WalkError("point inside the finite-difference safety margin")
    out = np.empty(domain.dim)
    for j in range(domain.dim):
        e = np.zeros(domain.dim)
        e[j] = h
        out[j] = (u_infinity(domain, x + e, mode, cfg) - u_infinity(domain, x - e, mode, cfg)) / (2 * h)
    return out
