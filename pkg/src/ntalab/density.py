"""Poisson-kernel estimates, doubling and A-infinity ratios, and mean oscillation of boundary fields."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .geometry.quadrature import ball_volume
from .geometry.domains import Domain, DomainError, VertexError
from .geometry.sampling import MeasureEstimate, sample_boundary
from .wos import (
    EmpiricalMeasure, WalkConfig, WalkError, ball_indicator, green_at_points, harmonic_measure, hit_cloud,
    u_infinity,
)

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class BoundaryField:
    """A (scalar or vector) function on the smooth part of ∂Ω."""

    name: str
    domain: Domain
    evaluator: Callable

    def __call__(self, points):
        v = np.asarray(self.evaluator(np.atleast_2d(points)), float)
        return v[:, None] if v.ndim == 1 else v


def normal_field(domain: Domain) -> BoundaryField:
    return BoundaryField("normal", domain, lambda z: domain.outer_normal(z, check_vertex=False))


def log_field(domain: Domain, h: Callable, name="log_h") -> BoundaryField:
    """``log max(h, 1e-12)``."""
    return BoundaryField(name, domain, lambda z: np.log(np.maximum(np.asarray(h(z), float), LOG_FLOOR)))


def oscillation(field: BoundaryField, center, r, samples=4000, seed=0):
    """Surface-weighted L² mean oscillation ``(⨍_B |f - ⨍f|² dσ)^{1/2}`` over ``∂Ω ∩ B(center, r)``."""
    bs = sample_boundary(field.domain, center, r, samples, seed)
    vals = field(bs.points)
    vals = vals - vals[0]  # shift-invariance; keeps constant fields exactly at zero
    w = bs.weights / bs.weights.sum()
    mean = w @ vals
    dev = vals - mean
    return float(math.sqrt(max(float(w @ np.sum(dev * dev, axis=1)), 0.0)))


@dataclass(frozen=True)
class OscillationProfile:
    scales: np.ndarray
    sup_oscillation: np.ndarray
    centers_per_scale: int
    field: str = ""
    argmax: tuple = ()

    def __post_init__(self):
        if np.any(np.asarray(self.sup_oscillation) < 0):
            raise ValueError("oscillations are non-negative")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scale", "sup_oscillation", "centers"])
            for s, v in zip(self.scales, self.sup_oscillation):
                w.writerow([repr(float(s)), repr(float(v)), self.centers_per_scale])

    def as_dict(self):
        return {"field": self.field, "scales": [float(s) for s in self.scales],
                "sup_oscillation": [float(v) for v in self.sup_oscillation],
                "centers_per_scale": self.centers_per_scale}


def vmo_profile(domain: Domain, field: BoundaryField, scales: Sequence[float], centers_per_scale=8, seed=0,
                window=1.0, samples=4000) -> OscillationProfile:
    """Per scale, the sup of :func:`oscillation` over boundary centres.

    Centres are drawn by surface measure from ``∂Ω ∩ B(0, window)``; a
    conical vertex is always included.  The same centres serve every scale.
    """
    scales = np.asarray(scales, float)
    if np.any(scales <= 0) or np.any(np.diff(scales) >= 0):
        raise ValueError("scales must be positive and decreasing")
    centers = []
    vtx = domain.vertex()
    if vtx is not None:
        centers.append(vtx)
    n_random = centers_per_scale - len(centers)
    if n_random > 0:
        origin = domain.project(np.zeros(domain.dim))[0]
        centers.extend(sample_boundary(domain, origin, window, n_random, seed).points)
    centers = np.array(centers)
    sups, where = [], []
    for k, r in enumerate(scales):
        vals = [oscillation(field, c, r, samples, seed + 7919 * (k + 1)) for c in centers]
        i = int(np.argmax(vals))
        sups.append(vals[i])
        where.append(i)
    return OscillationProfile(scales, np.array(sups), len(centers), field.name, tuple(where))


# ---------------------------------------------------------------------------
# Poisson kernel


@dataclass(frozen=True)
class KernelEstimate:
    radius: float
    value: float
    std_error: float
    harmonic: Optional[float] = None
    surface: Optional[float] = None

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _check_smooth(domain, xi):
    if domain.is_cone and domain.dist_to_vertex(xi)[0] <= 1e-9 * max(1.0, float(np.linalg.norm(xi))):
        raise VertexError("Poisson kernel estimates need a smooth boundary point")


def poisson_kernel_estimate(domain: Domain, pole: Union[np.ndarray, str], xi, radii: Sequence[float],
                            cfg: Optional[WalkConfig] = None, cloud: Optional[EmpiricalMeasure] = None,
                            surface_samples=20_000, profile=None):
    """Small-ball ratios approximating ``h(ξ)``.

    With a finite pole: ``ω^p(B(ξ,r)) / σ(B(ξ,r))``.  With ``pole="infinity"``:
    ``c u(ξ - r/2 n) r^{n-1} / σ(B(ξ,r))`` with ``c = 2 |B^n|`` (the constant that
    makes the half-space ratio exactly 1), and the exact ``|∇u(ξ)|`` is returned
    alongside when ``u`` is explicit.
    """
    xi = np.asarray(xi, float)
    _check_smooth(domain, xi)
    cfg = cfg or WalkConfig()
    radii = [float(r) for r in radii]
    if min(radii) <= 10 * cfg.eps_shell:
        raise WalkError("radius below the walk resolution")
    out = []
    if isinstance(pole, str):
        if pole != "infinity":
            raise ValueError("pole must be a point or 'infinity'")
        nv = domain.outer_normal(xi)[0]
        for r in radii:
            sig = sample_boundary(domain, xi, r, surface_samples, cfg.seed).area
            u = u_infinity(domain, xi - 0.5 * r * nv, "explicit", cfg, profile)
            val = 2 * ball_volume(domain.n) * u * r ** (domain.n - 1) / sig.value
            out.append(KernelEstimate(r, val, val * sig.std_error / sig.value, u, sig.value))
        exact = None
        try:
            from .cones import explicit_solution

            exact = float(np.linalg.norm(explicit_solution(domain, profile).gradient(xi)))
        except DomainError:
            pass
        return out, exact
    cloud = cloud if cloud is not None else hit_cloud(domain, pole, cfg)
    for r in radii:
        om = harmonic_measure(domain, pole, ball_indicator(xi, r), cfg, cloud)
        sig = sample_boundary(domain, xi, r, surface_samples, cfg.seed).area
        val = om.value / sig.value
        se = math.hypot(om.std_error / sig.value, val * sig.std_error / sig.value)
        out.append(KernelEstimate(r, val, se, om.value, sig.value))
    return out


def set_kernel_ratio(cloud: EmpiricalMeasure, indicator: Callable, sigma: float, walks: int):
    """``ω(E)/σ(E)``; a set with ``σ(E) = 0`` (lower dimensional) has ratio 0."""
    if sigma <= 0:
        return 0.0
    hit = np.count_nonzero(np.asarray(indicator(cloud.atoms), bool)) if len(cloud) else 0
    return hit / walks / sigma


def doubling_ratio(domain: Domain, pole, xi, r, cfg: Optional[WalkConfig] = None,
                   cloud: Optional[EmpiricalMeasure] = None) -> MeasureEstimate:
    """``ω^p(B(ξ,2r)) / ω^p(B(ξ,r))`` with a delta-method standard error."""
    pole = np.asarray(pole, float)
    xi = np.asarray(xi, float)
    if np.linalg.norm(pole - xi) < 4 * r:
        raise WalkError("pole must lie outside B(xi, 4r)")
    cfg = cfg or WalkConfig()
    cloud = cloud if cloud is not None else hit_cloud(domain, pole, cfg)
    small = harmonic_measure(domain, pole, ball_indicator(xi, r), cfg, cloud)
    big = harmonic_measure(domain, pole, ball_indicator(xi, 2 * r), cfg, cloud)
    if small.value == 0:
        raise WalkError("no walks reached B(xi, r); increase walks")
    ratio = big.value / small.value
    n = small.samples
    # multinomial: hits in the inner ball and in the annulus
    p1, p2 = small.value, big.value - small.value
    se = math.sqrt(max(p2 * (1 - p2) + p2 * p2 / p1 * (1 - p1) + 2 * p2 * p2, 0.0) / n) / p1 if p2 > 0 else 0.0
    return MeasureEstimate(ratio, se, n)


@dataclass(frozen=True)
class AInfinityReport:
    lhs: float
    mid: float
    rhs: float
    sigma_ratio: float
    constant: float
    epsilon: float
    passed: bool

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def ainfty_ratio_check(domain: Domain, pole, xi, r, indicator: Callable, epsilon, cfg: Optional[WalkConfig] = None,
                       constant=2.0, cloud=None, surface_samples=40_000) -> AInfinityReport:
    """``C^{-1}(σE/σB)^{1+ε} ≤ ωE/ωB ≤ C (σE/σB)^{1-ε}`` for ``E ⊂ B(ξ, r)`` given by ``indicator``."""
    xi = np.asarray(xi, float)
    cfg = cfg or WalkConfig()
    bs = sample_boundary(domain, xi, r, surface_samples, cfg.seed)
    inE = np.asarray(indicator(bs.points), bool)
    s_ratio = float(bs.weights[inE].sum() / bs.weights.sum())
    if s_ratio <= 0:
        raise WalkError("E has vanishing surface measure at this resolution")
    cloud = cloud if cloud is not None else hit_cloud(domain, pole, cfg)
    ball = ball_indicator(xi, r)
    wB = harmonic_measure(domain, pole, ball, cfg, cloud).value
    wE = harmonic_measure(domain, pole, lambda z: ball(z) & np.asarray(indicator(z), bool), cfg, cloud).value
    if wB == 0:
        raise WalkError("no walks reached the ball")
    mid = wE / wB
    lhs = s_ratio ** (1 + epsilon) / constant
    rhs = constant * s_ratio ** (1 - epsilon)
    return AInfinityReport(lhs, mid, rhs, s_ratio, constant, epsilon, lhs <= mid <= rhs)


# ---------------------------------------------------------------------------
# far-pole kernels through normal derivatives of the Green function


@dataclass(frozen=True)
class KernelRatioTrace:
    radii: np.ndarray
    ratios: np.ndarray
    std_errors: np.ndarray
    extrapolated: float
    anchor_green: float

    def as_dict(self):
        return {"radii": self.radii.tolist(), "ratios": self.ratios.tolist(),
                "std_errors": self.std_errors.tolist(), "extrapolated": self.extrapolated,
                "anchor_green": self.anchor_green}


def finite_pole_kernel_ratios(domain: Domain, xi, radii: Sequence[float], p_far, anchor,
                              cfg: Optional[WalkConfig] = None, u_anchor: Optional[float] = None,
                              profile=None, balance=True, anchor_factor=4) -> KernelRatioTrace:
    """``u(a) g(ξ - r n, p) / (r g(a, p))`` for shrinking ``r``.

    ``p_far`` is a pole or an (m, d) array of poles whose Green functions are
    averaged (see :func:`pole_orbit`).  The relative variance grows like
    ``1/r``, so with ``balance`` the walk count at radius ``r`` is
    ``cfg.walks * max(radii) / r``; the anchor uses ``anchor_factor * cfg.walks``.
    ``extrapolated`` is the ``r = 0`` value of a weighted quadratic fit in ``r``.

    As ``r → 0`` this is the finite-pole kernel ``-∂_n g(ξ, p)`` normalized by
    ``g(a, p)/u(a)``, which tends to the pole-at-infinity kernel ``h(ξ)`` as ``p``
    recedes.  ``u(a)`` defaults to the explicit solution at the anchor.
    """
    xi = np.asarray(xi, float)
    _check_smooth(domain, xi)
    cfg = cfg or WalkConfig()
    p_far = np.atleast_2d(np.asarray(p_far, float))
    anchor = np.asarray(anchor, float)
    radii = np.asarray(radii, float)
    nv = domain.outer_normal(xi)[0]
    if u_anchor is None:
        u_anchor = u_infinity(domain, anchor, "explicit", cfg, profile)
    ga, sa = green_at_points(domain, anchor, p_far, cfg.with_(walks=anchor_factor * cfg.walks))
    ga, sa = float(ga[0]), float(sa[0])
    r_top = float(radii.max())
    g = np.empty(len(radii))
    se = np.empty(len(radii))
    offset = anchor_factor * cfg.walks
    for k, r in enumerate(radii):
        walks = int(math.ceil(cfg.walks * r_top / r)) if balance else cfg.walks
        gk, sk = green_at_points(domain, xi - r * nv, p_far, cfg.with_(walks=walks), first_index=offset)
        g[k], se[k] = gk[0], sk[0]
        offset += walks
    ratios = u_anchor * g / (radii * ga)
    errs = np.abs(ratios) * np.sqrt((se / g) ** 2 + (sa / ga) ** 2)
    deg = min(2, len(radii) - 1)
    coef = np.polyfit(radii, ratios, deg, w=1 / np.maximum(errs, 1e-300))
    return KernelRatioTrace(radii, ratios, errs, float(coef[-1]), ga)


def pole_orbit(pole, count=4, plane=(0, 1)):
    """``count`` rotations of ``pole`` in the coordinate ``plane``.

    Averaging a Green function over the orbit cancels the angular modes
    ``e^{ikφ}`` with ``count ∤ k``, which otherwise decay only slowly as the
    pole recedes.
    """
    pole = np.asarray(pole, float)
    i, j = plane
    out = np.repeat(pole[None, :], count, axis=0)
    for k in range(count):
        a = 2 * math.pi * k / count
        out[k, i] = math.cos(a) * pole[i] - math.sin(a) * pole[j]
        out[k, j] = math.sin(a) * pole[i] + math.cos(a) * pole[j]
    return out
