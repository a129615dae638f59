"""Blow-up and blow-down rescalings, flatness classes and variational checks."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .cones import explicit_solution
from .geometry.domains import HALFSPACE, Domain, rescale
from .geometry.flatness import best_plane
from .geometry.quadrature import sphere_quadrature
from .geometry.sampling import MeasureEstimate, sample_boundary
from .potential import boundary_measure
from .rng import generator
from .wos import (
    EmpiricalMeasure, WalkConfig, WalkError, ball_indicator, green_finite_pole, harmonic_measure,
    harmonic_measure_adjoint, hit_cloud,
)

INFINITY = "infinity"
ADJOINT_SEPARATION = 20.0
MIN_SEPARATION = 10.0

Pole = Union[None, str, np.ndarray, Sequence[float]]


def _is_infinite(p):
    return p is None or (isinstance(p, str) and p == INFINITY)


@dataclass(frozen=True)
class RescaleSpec:
    """A sequence of rescalings ``Ω_i = (Ω - x_i) / r_i`` with poles ``p_i``."""

    base_points: np.ndarray
    radii: np.ndarray
    poles: tuple

    def __post_init__(self):
        r = np.asarray(self.radii, float)
        x = np.atleast_2d(np.asarray(self.base_points, float))
        if len(x) == 1 and len(r) > 1:
            x = np.repeat(x, len(r), axis=0)
        if len(x) != len(r) or len(self.poles) != len(r):
            raise ValueError("base_points, radii and poles must have equal length")
        if np.any(r <= 0):
            raise ValueError("radii must be positive")
        d = np.diff(r)
        if len(d) and not (np.all(d < 0) or np.all(d > 0)):
            raise ValueError("radii must be strictly monotone")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "base_points", x)

    @property
    def separations(self):
        """``|p_i - x_i| / r_i`` (``inf`` for poles at infinity)."""
        out = []
        for x, r, p in zip(self.base_points, self.radii, self.poles):
            out.append(math.inf if _is_infinite(p) else float(np.linalg.norm(np.asarray(p, float) - x)) / r)
        return np.array(out)

    def domains(self, domain: Domain):
        return [rescale_domain(domain, x, r) for x, r in zip(self.base_points, self.radii)]


def rescale_domain(domain: Domain, x_i, r_i) -> Domain:
    """``(Ω - x_i) / r_i``; the defining function becomes ``φ(r_i x + x_i)``."""
    return rescale(domain, np.asarray(x_i, float), float(r_i))


def _check_separation(x_i, r_i, p_i):
    sep = float(np.linalg.norm(np.asarray(p_i, float) - x_i)) / r_i
    if sep < MIN_SEPARATION:
        raise WalkError(f"pole separation {sep:.3g} below {MIN_SEPARATION}")
    return sep


def _ball_omega(domain, x_i, r_i, p_i, cfg, sep):
    """``ω^p(B(x_i, r_i))``: direct counting for nearby poles, the adjoint estimator for far ones."""
    if sep < ADJOINT_SEPARATION:
        return harmonic_measure(domain, p_i, ball_indicator(x_i, r_i), cfg)
    return harmonic_measure_adjoint(domain, p_i, x_i, r_i, cfg)


@dataclass(frozen=True)
class Normalization:
    """``σ(B(x_i, r_i)) / ω(B(x_i, r_i))`` with its ingredients."""

    sigma: float
    omega: float
    omega_std_error: float

    @property
    def factor(self):
        if self.omega <= 0:
            raise WalkError("harmonic measure of the ball vanished at this resolution")
        return self.sigma / self.omega


def ball_normalization(domain: Domain, x_i, r_i, p_i: Pole, cfg: Optional[WalkConfig] = None,
                       profile=None, samples=20_000) -> Normalization:
    """``σ(B)`` and ``ω(B)`` for ``B = B(x_i, r_i)``, all seeded by ``cfg.seed``.

    At infinity ``ω = ∫_B |∇u| dσ`` with the explicit ``u``.
    """
    x_i = np.asarray(x_i, float)
    cfg = cfg or WalkConfig()
    bs = sample_boundary(domain, x_i, r_i, samples, cfg.seed)
    sigma = bs.area.value
    if _is_infinite(p_i):
        sol = explicit_solution(domain, profile)
        h = np.linalg.norm(sol.gradient(_inside(domain, bs.points, bs.normals, r_i)), axis=1)
        return Normalization(sigma, float(bs.weights @ h), 0.0)
    sep = _check_separation(x_i, r_i, p_i)
    om = _ball_omega(domain, x_i, r_i, np.asarray(p_i, float), cfg, sep)
    return Normalization(sigma, om.value, om.std_error)


def _inside(domain, pts, normals, scale):
    # one-sided gradient limits: step a hair inside along -n
    return pts - 1e-9 * max(scale, 1.0) * normals


def rescaled_u(domain: Domain, x, x_i, r_i, p_i: Pole, cfg: Optional[WalkConfig] = None, profile=None,
               norm: Optional[Normalization] = None) -> float:
    """``u_i(x) = g(r_i x + x_i, p_i) σ(B(x_i,r_i)) / (r_i ω^{p_i}(B(x_i,r_i)))``.

    With ``p_i`` at infinity ``g`` is the explicit solution ``u``.
    """
    x = np.asarray(x, float)
    x_i = np.asarray(x_i, float)
    cfg = cfg or WalkConfig()
    y = r_i * x + x_i
    if not _is_infinite(p_i):
        _check_separation(x_i, r_i, p_i)
    if domain.signed_distance(y)[0] <= 0:
        return 0.0
    norm = norm or ball_normalization(domain, x_i, r_i, p_i, cfg, profile)
    if _is_infinite(p_i):
        g = float(explicit_solution(domain, profile).value(y)[0])
    else:
        g = green_finite_pole(domain, y, np.asarray(p_i, float), cfg).value
    return g * norm.factor / r_i


def rescaled_kernel(domain: Domain, x, x_i, r_i, p_i: Pole, cfg: Optional[WalkConfig] = None,
                    kernel_radius=0.1, cloud: Optional[EmpiricalMeasure] = None, profile=None,
                    norm: Optional[Normalization] = None, samples=20_000) -> MeasureEstimate:
    """``h_i(x) = h(r_i x + x_i) σ(B(x_i,r_i)) / ω^{p_i}(B(x_i,r_i))`` at a boundary point ``x`` of ``Ω_i``.

    ``h`` is the small-ball ratio ``ω(B(y, ρ)) / σ(B(y, ρ))`` with
    ``ρ = kernel_radius * r_i``; at infinity it is the exact ``|∇u(y)|``.
    """
    x = np.asarray(x, float)
    x_i = np.asarray(x_i, float)
    cfg = cfg or WalkConfig()
    y = r_i * x + x_i
    norm = norm or ball_normalization(domain, x_i, r_i, p_i, cfg, profile, samples)
    if _is_infinite(p_i):
        nv = domain.outer_normal(y, check_vertex=False)
        h = float(np.linalg.norm(explicit_solution(domain, profile).gradient(_inside(domain, y[None], nv, r_i))))
        return MeasureEstimate(h * norm.factor, 0.0, 1)
    rho = kernel_radius * r_i
    p = np.asarray(p_i, float)
    cloud = cloud if cloud is not None else hit_cloud(domain, p, cfg)
    om = harmonic_measure(domain, p, ball_indicator(y, rho), cfg, cloud)
    sig = sample_boundary(domain, y, rho, samples, cfg.seed).area.value
    val = om.value / sig * norm.factor
    rel = math.hypot(om.std_error / om.value if om.value else math.inf,
                     norm.omega_std_error / norm.omega if norm.omega else 0.0)
    return MeasureEstimate(val, abs(val) * rel if math.isfinite(rel) else 0.0, om.samples)


@dataclass(frozen=True)
class KernelMean:
    radius: float
    mean: float
    std_error: float
    points: int

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def rescaled_kernel_means(domain: Domain, x_i, radii: Sequence[float], pole: Pole,
                          cfg: Optional[WalkConfig] = None, points=16, kernel_radius=0.25, profile=None,
                          seed=0):
    """Mean of ``h_i`` over boundary points of ``Ω_i ∩ B(0, 1 - kernel_radius)`` for each radius.

    A finite ``pole`` is fixed while ``r_i`` shrinks (so the separation grows);
    one hit cloud serves the whole sequence.
    """
    x_i = np.asarray(x_i, float)
    cfg = cfg or WalkConfig()
    cloud = None if _is_infinite(pole) else hit_cloud(domain, np.asarray(pole, float), cfg)
    out = []
    for k, r in enumerate(radii):
        dom_i = rescale_domain(domain, x_i, r)
        origin = np.zeros(domain.dim)
        pts = sample_boundary(dom_i, origin, 1.0 - kernel_radius, points, seed + k).points
        if _is_infinite(pole):
            norm = ball_normalization(domain, x_i, r, pole, cfg, profile)
        else:
            _check_separation(x_i, r, pole)
            om = harmonic_measure(domain, pole, ball_indicator(x_i, r), cfg, cloud)
            norm = Normalization(sample_boundary(domain, x_i, r, 20_000, cfg.seed).area.value, om.value,
                                 om.std_error)
        vals = np.array([rescaled_kernel(domain, z, x_i, r, pole, cfg, kernel_radius, cloud, profile, norm).value
                         for z in pts])
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        out.append(KernelMean(float(r), float(vals.mean()), se, len(vals)))
    return out


# ---------------------------------------------------------------------------
# flatness traces


def theta_trace(domain: Domain, x, radii: Sequence[float], samples=3000, seed=0):
    """``(r, Θ(x, r))`` with Θ from :func:`best_plane` at each scale."""
    x = np.asarray(x, float)
    return [(float(r), best_plane(domain, x, float(r), count=samples, seed=seed).theta) for r in radii]


def blowdown_theta_trace(domain: Domain, x, radii: Sequence[float], samples=3000, seed=0):
    """Flatness at increasing scales."""
    radii = np.asarray(radii, float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing")
    return theta_trace(domain, x, radii, samples, seed)


def loglog_slope(trace):
    r, t = np.array(trace, float).T
    return float(np.polyfit(np.log(r), np.log(t), 1)[0])


@dataclass(frozen=True)
class FlatnessClassResult:
    passed: bool
    witness: Optional[np.ndarray]
    condition: Optional[str]
    samples: int

    def as_dict(self):
        return {"pass": self.passed, "witness": None if self.witness is None else self.witness.tolist(),
                "condition": self.condition, "samples": self.samples}


def _ball_points(center, rho, count, seed):
    rng = generator(seed, 0xB1)
    d = len(center)
    g = rng.standard_normal((count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    inner = g * (rho * rng.random(count) ** (1.0 / d))[:, None]
    shell = rng.standard_normal((count, d))
    shell *= rho / np.linalg.norm(shell, axis=1, keepdims=True)
    return center + np.concatenate([inner, shell])


def flatness_class_check(u: Callable, x0, rho, nu, sigma_plus, sigma_minus, samples=20_000, seed=0,
                         slack=1e-12) -> FlatnessClassResult:
    """Membership of ``u`` in the flatness class with parameters ``(σ₊, σ⁻)`` in direction ``ν``.

    Checks ``u = 0`` where ``(x - x0)·ν ≥ σ₊ρ`` and ``u ≥ -(x - x0)·ν - σ⁻ρ`` on
    interior and sphere samples of ``B(x0, ρ)``; the first violation is the witness.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if not (0 < sigma_plus < 1 and 0 < sigma_minus < 1):
        raise ValueError("sigma_plus and sigma_minus must lie in (0, 1)")
    x0 = np.asarray(x0, float)
    nu = np.asarray(nu, float)
    nu = nu / np.linalg.norm(nu)
    pts = _ball_points(x0, rho, samples, seed)
    vals = np.asarray(u(pts), float)
    s = (pts - x0) @ nu
    bad = (s >= sigma_plus * rho) & (np.abs(vals) > slack)
    if np.any(bad):
        return FlatnessClassResult(False, pts[np.argmax(bad)], "zero_above", len(pts))
    bad = vals < -s - sigma_minus * rho - slack
    if np.any(bad):
        return FlatnessClassResult(False, pts[np.argmax(bad)], "lower_bound", len(pts))
    return FlatnessClassResult(True, None, None, len(pts))


# ---------------------------------------------------------------------------
# variational checks


def _lattice(center, radius, h, lo=None, hi=None):
    """Midpoints ``center + (k + 1/2) h`` inside ``B(center, radius)``, optionally clipped to a box."""
    center = np.asarray(center, float)
    d = len(center)
    n = int(math.ceil(radius / h))
    axes = []
    for j in range(d):
        k = np.arange(-n, n)
        c = center[j] + (k + 0.5) * h
        if lo is not None:
            c = c[(c > lo[j]) & (c < hi[j])]
        axes.append(c)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[np.sum((pts - center) ** 2, axis=1) < radius * radius]


def fd_gradient(u: Callable, x, h):
    """Central differences with step ``h``."""
    x = np.atleast_2d(x)
    d = x.shape[1]
    out = np.empty_like(x)
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        out[:, j] = (np.asarray(u(x + e), float) - np.asarray(u(x - e), float)) / (2 * h)
    return out


def _chunks(pts, size=200_000):
    for i in range(0, len(pts), size):
        yield pts[i:i + size]


def ac_functional(u: Callable, center, radius, grid_spacing) -> float:
    """Midpoint-rule ``∫_B (|∇u|² + χ_{u>0})`` with central-difference gradients."""
    if grid_spacing > radius / 16:
        raise ValueError("grid_spacing must be at most radius / 16")
    center = np.asarray(center, float)
    vol = grid_spacing ** len(center)
    total = 0.0
    for blk in _chunks(_lattice(center, radius, grid_spacing)):
        g = fd_gradient(u, blk, grid_spacing)
        total += float(np.sum(np.sum(g * g, axis=1) + (np.asarray(u(blk), float) > 0)))
    return total * vol


def _bump1(t):
    out = np.zeros_like(t)
    dout = np.zeros_like(t)
    ok = np.abs(t) < 1
    s = 1.0 - t[ok] ** 2
    e = np.exp(-1.0 / s)
    out[ok] = e
    dout[ok] = e * (-2.0 * t[ok] / s ** 2)
    return out, dout


@dataclass(frozen=True)
class TensorBump:
    """``b(x) = Π_j β((x_j - c_j)/s)`` with ``β(t) = exp(-1/(1-t²))``; support the cube ``|x - c|_∞ < s``."""

    center: np.ndarray
    half_width: float

    def __call__(self, x):
        return self.value_and_gradient(x)[0]

    def value_and_gradient(self, x):
        x = np.atleast_2d(x)
        t = (x - self.center) / self.half_width
        b, db = _bump1(t)
        val = np.prod(b, axis=1)
        grad = np.empty_like(x)
        for j in range(x.shape[1]):
            others = np.prod(np.delete(b, j, axis=1), axis=1)
            grad[:, j] = db[:, j] * others / self.half_width
        return val, grad

    def support_radius(self, about):
        c = np.asarray(self.center, float)
        return float(np.linalg.norm(np.abs(c - about) + self.half_width))


@dataclass(frozen=True)
class TestField:
    """``φ = Σ_k a_k b_k(x) e_k`` for tensor bumps ``b_k`` and constant vectors ``a_k``."""

    terms: tuple
    name: str = "phi"

    __test__ = False  # not a pytest class

    def value_and_jacobian(self, x):
        x = np.atleast_2d(x)
        d = x.shape[1]
        val = np.zeros((len(x), d))
        jac = np.zeros((len(x), d, d))
        for bump, vec in self.terms:
            b, g = bump.value_and_gradient(x)
            val += b[:, None] * vec
            jac += vec[None, :, None] * g[:, None, :]
        return val, jac

    def __add__(self, other):
        return TestField(self.terms + other.terms, f"{self.name}+{other.name}")

    def __mul__(self, c):
        return TestField(tuple((b, c * v) for b, v in self.terms), f"{c}*{self.name}")

    __rmul__ = __mul__

    def support_radius(self, about):
        return max(b.support_radius(about) for b, _ in self.terms)

    def box(self):
        lo = np.min([b.center - b.half_width for b, _ in self.terms], axis=0)
        hi = np.max([b.center + b.half_width for b, _ in self.terms], axis=0)
        return lo, hi


def bump_field(center, half_width, direction, name=None) -> TestField:
    center = np.asarray(center, float)
    direction = np.asarray(direction, float)
    return TestField(((TensorBump(center, float(half_width)), direction),), name or "bump")


def first_variation_residual(u: Callable, phi: TestField, center, radius, grid_spacing) -> float:
    """``∫_B [(|∇u|² + χ_{u>0}) div φ - 2 ∇u Dφ ∇uᵀ]`` by the midpoint rule."""
    center = np.asarray(center, float)
    if phi.support_radius(center) >= radius:
        raise ValueError("test field must be supported strictly inside the ball")
    lo, hi = phi.box()
    total = 0.0
    for blk in _chunks(_lattice(center, radius, grid_spacing, lo, hi)):
        g = fd_gradient(u, blk, grid_spacing)
        _, jac = phi.value_and_jacobian(blk)
        div = np.trace(jac, axis1=1, axis2=2)
        quad = np.einsum("ni,nij,nj->n", g, jac, g)
        total += float(np.sum((np.sum(g * g, axis=1) + (np.asarray(u(blk), float) > 0)) * div - 2 * quad))
    return total * grid_spacing ** len(center)


def sphere_average_check(u: Callable, x, radii: Sequence[float], order=16):
    """``(r, r^{-n-1} ∫_{∂B(x,r)} u dH^n)`` per radius."""
    x = np.asarray(x, float)
    nodes, w = sphere_quadrature(len(x), order)
    return [(float(r), float(w @ np.asarray(u(x + r * nodes), float)) / r) for r in radii]


def gauss_green_residual(domain: Domain, zeta: TensorBump, grid_spacing, solution=None, profile=None,
                         surface_order=8, ang_order=None) -> float:
    """``|∫_Ω -∇u·∇ζ dm - ∫_∂Ω ζ dH^n|`` for the explicit solution ``u`` (``|∇u| = 1`` on ∂Ω)."""
    sol = solution or explicit_solution(domain, profile)
    c = np.asarray(zeta.center, float)
    s = zeta.half_width
    lo, hi = c - s, c + s
    vol = 0.0
    for blk in _chunks(_lattice(c, s * math.sqrt(domain.dim), grid_spacing, lo, hi)):
        inside = domain.signed_distance(blk) > 0
        blk = blk[inside]
        if len(blk):
            _, gz = zeta.value_and_gradient(blk)
            vol -= float(np.sum(np.einsum("ni,ni->n", sol.gradient(blk), gz)))
    vol *= grid_spacing ** domain.dim
    reach = float(np.linalg.norm(np.full(domain.dim, s)))
    if domain.code == HALFSPACE:
        mu = boundary_measure(domain, c, reach, zeta, r_min=1e-3 * reach, order=surface_order, ang_order=ang_order)
    else:
        vtx = domain.vertex()
        rmax = float(np.linalg.norm(c - vtx)) + reach if vtx is not None else reach
        mu = boundary_measure(domain, c, rmax, zeta, r_min=1e-3 * rmax, order=surface_order, ang_order=ang_order)
    return abs(vol - mu.total_mass)


@dataclass
class VariationalReport:
    ball: tuple
    functional_value: float
    first_variation_residuals: list
    grid_spacing: float
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        c, r = self.ball
        return {"ball": {"center": [float(v) for v in c], "radius": float(r)},
                "functional_value": self.functional_value,
                "first_variation_residuals": [[k, float(v)] for k, v in self.first_variation_residuals],
                "grid_spacing": self.grid_spacing, **self.extra}

    def to_json(self, path=None):
        text = json.dumps(self.as_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def variational_report(u: Callable, center, radius, grid_spacing, fields: Sequence[TestField]) -> VariationalReport:
    center = np.asarray(center, float)
    value = ac_functional(u, center, radius, grid_spacing)
    res = [(f.name, first_variation_residual(u, f, center, radius, grid_spacing)) for f in fields]
    return VariationalReport((tuple(center), float(radius)), value, res, float(grid_spacing))


def refinement_sweep(fn: Callable[[float], float], spacings: Sequence[float]):
    """``[(h, fn(h))]`` for each grid spacing."""
    return [(float(h), float(fn(h))) for h in spacings]


def convergence_order(sweep, reference=0.0):
    """Least-squares slope of ``log |value - reference|`` against ``log h``."""
    h, v = np.array(sweep, float).T
    return float(np.polyfit(np.log(h), np.log(np.abs(v - reference)), 1)[0])


def sweep_to_csv(sweep, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "value"])
        for h, v in sweep:
            w.writerow([repr(h), repr(v)])


def normal_vmo_blowup_integral(domains: Sequence[Domain], window=1.0, samples=4000, seed=0):
    """``∫_{∂Ω_i ∩ B(0, window)} |n_i + e_d|² dσ_i`` per domain."""
    out = []
    for dom in domains:
        e = np.zeros(dom.dim)
        e[-1] = 1.0
        bs = sample_boundary(dom, np.zeros(dom.dim), window, samples, seed)
        out.append(float(bs.weights @ np.sum((bs.normals + e) ** 2, axis=1)))
    return out
