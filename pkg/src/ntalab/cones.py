"""Spherical profile of the four-dimensional counterexample cone and explicit solutions.

The profile ``f`` solves the zonal eigenvalue problem on S^3,

    (sin t cos t f')' + 3 sin t cos t f = 0,   f(0) = 1, f'(0) = 0,

where ``t`` is the angle between a point and the plane ``{x3 = x4 = 0}``.  Its
first zero ``theta0`` fixes the cone ``{t < theta0}`` and ``tau = -1/f'(theta0)``
normalizes ``v = r tau f(t)`` so that ``|grad v| = 1`` on the boundary.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .geometry.domains import BLOCKCONE, HALFSPACE, Domain, DomainError, VertexError, product_cone

EIGENVALUE = 3.0
START = 1e-3
STOP_MARGIN = 1e-6


class ProfileError(RuntimeError):
    """The profile integration failed to produce a valid root."""


def _f2(theta, f, fp):
    """f'' from the ODE: f'' = -2 cot(2t) f' - 3 f (with the limit -3/2 f(0) at t = 0)."""
    theta = np.asarray(theta, float)
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    val = -2.0 * fp / np.tan(2.0 * safe) - EIGENVALUE * f
    return np.where(small, -0.5 * EIGENVALUE * f, val)


def series(theta):
    """Startup series at the singular endpoint, in ``s = sin^2 t``; returns (f, f')."""
    s = np.sin(theta) ** 2
    f = 1.0 - 0.75 * s - (15.0 / 64.0) * s * s
    ds = np.sin(2 * theta)
    fp = (-0.75 - (15.0 / 32.0) * s) * ds
    return f, fp


def _rhs(theta, y):
    return [y[1], float(_f2(theta, y[0], y[1]))]


def _quintic(t, h, f0, f1, d0, d1, s0, s1):
    """Quintic Hermite interpolation on [0, h] at local coordinate ``t``; returns f, f', f''."""
    u = t / h
    u2, u3, u4, u5 = u * u, u ** 3, u ** 4, u ** 5
    h00 = 1 - 10 * u3 + 15 * u4 - 6 * u5
    h01 = 10 * u3 - 15 * u4 + 6 * u5
    h10 = u - 6 * u3 + 8 * u4 - 3 * u5
    h11 = -4 * u3 + 7 * u4 - 3 * u5
    h20 = 0.5 * (u2 - 3 * u3 + 3 * u4 - u5)
    h21 = 0.5 * (u3 - 2 * u4 + u5)
    val = h00 * f0 + h01 * f1 + h * (h10 * d0 + h11 * d1) + h * h * (h20 * s0 + h21 * s1)
    g00 = (-30 * u2 + 60 * u3 - 30 * u4) / h
    g10 = 1 - 18 * u2 + 32 * u3 - 15 * u4
    g11 = -12 * u2 + 28 * u3 - 15 * u4
    g20 = h * 0.5 * (2 * u - 9 * u2 + 12 * u3 - 5 * u4)
    g21 = h * 0.5 * (3 * u2 - 8 * u3 + 5 * u4)
    der = g00 * (f0 - f1) + g10 * d0 + g11 * d1 + g20 * s0 + g21 * s1
    k00 = (-60 * u + 180 * u2 - 120 * u3) / h ** 2
    k10 = (-36 * u + 96 * u2 - 60 * u3) / h
    k11 = (-24 * u + 84 * u2 - 60 * u3) / h
    k20 = 0.5 * (2 - 18 * u + 36 * u2 - 20 * u3)
    k21 = 0.5 * (6 * u - 24 * u2 + 20 * u3)
    sec = k00 * (f0 - f1) + k10 * d0 + k11 * d1 + k20 * s0 + k21 * s1
    return val, der, sec


@dataclass(frozen=True)
class SphericalProfile:
    grid: np.ndarray
    f: np.ndarray
    f_prime: np.ndarray
    theta0: float
    f_prime_at_theta0: float
    tau: float
    solver_tolerance: float
    f_second: np.ndarray = field(repr=False, default=None)
    notes: tuple = ()
    root_residual: float = 0.0

    def __post_init__(self):
        if self.f_second is None:
            object.__setattr__(self, "f_second", _f2(self.grid, self.f, self.f_prime))

    def evaluate(self, theta):
        """(f, f', f'') at angles in [0, theta0]; quintic Hermite between grid nodes."""
        theta = np.clip(np.asarray(theta, float), 0.0, self.theta0)
        i = np.clip(np.searchsorted(self.grid, theta, side="right") - 1, 0, len(self.grid) - 2)
        h = self.grid[i + 1] - self.grid[i]
        return _quintic(theta - self.grid[i], h, self.f[i], self.f[i + 1], self.f_prime[i],
                        self.f_prime[i + 1], self.f_second[i], self.f_second[i + 1])

    def value(self, theta):
        return self.evaluate(theta)[0]

    def derivative(self, theta):
        return self.evaluate(theta)[1]

    def to_csv(self, path, stride=1):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "f", "f_prime"])
            for t, f, d in zip(self.grid[::stride], self.f[::stride], self.f_prime[::stride]):
                w.writerow([repr(float(t)), repr(float(f)), repr(float(d))])

    def as_dict(self):
        return {"theta0": self.theta0, "f_prime_at_theta0": self.f_prime_at_theta0, "tau": self.tau,
                "solver_tolerance": self.solver_tolerance, "grid_points": int(len(self.grid)),
                "root_residual": self.root_residual,
                "notes": list(self.notes)}


def theta0_root(fn, lo, hi, dfn=None):
    """Refine a sign-change bracket of ``fn`` to 1e-12 relative; requires f' < 0 at the root."""
    flo, fhi = fn(lo), fn(hi)
    if not (flo > 0 >= fhi or flo >= 0 > fhi):
        raise ProfileError("no sign change in the supplied bracket")
    root = brentq(fn, lo, hi, xtol=1e-15, rtol=1e-14, maxiter=200)
    slope = dfn(root) if dfn is not None else (fn(root + 1e-7) - fn(root - 1e-7)) / 2e-7
    if not slope < 0:
        raise ProfileError(f"profile slope at the root is {slope}, expected negative")
    return float(root), float(slope)


def solve_profile_ode(step=1e-3, tol=1e-10) -> SphericalProfile:
    """Adaptive DOP853 integration from the series start-up at ``START`` to the first zero."""
    if not 0 < step <= 1e-3:
        raise ValueError("step must lie in (0, 1e-3]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    f0, d0 = series(START)
    stop = math.pi / 2 - STOP_MARGIN

    def crossing(t, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1
    sol = solve_ivp(_rhs, (START, stop), [float(f0), float(d0)], method="DOP853",
                    rtol=tol * 1e-3, atol=tol * 1e-3, dense_output=True, events=crossing)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise ProfileError("profile has no zero in (0, pi/2); integration reached the stop angle")
    t_hit = float(sol.t_events[0][0])
    lo, hi = t_hit - 1e-3, t_hit + 1e-3  # last dense segment extends past the event
    root, slope = theta0_root(lambda t: float(sol.sol(t)[0]), lo, hi,
                              lambda t: float(sol.sol(t)[1]))
    n = int(math.ceil((root - START) / step))
    grid = np.concatenate([[0.0], np.linspace(START, root, n + 1)])
    dense = sol.sol(grid[1:])
    f = np.concatenate([[1.0], dense[0]])
    fp = np.concatenate([[0.0], dense[1]])
    f[-1] = 0.0
    fp[-1] = slope
    notes = []
    if np.any(np.diff(f[1:]) >= 0):
        raise ProfileError("profile is not strictly decreasing on the computed grid")
    notes.append("f strictly decreasing on (0, theta0]; f' < 0 there")
    return SphericalProfile(grid, f, fp, root, slope, -1.0 / slope, float(tol), notes=tuple(notes),
                            root_residual=abs(float(sol.sol(root)[0])))


def rk4_theta0(step):
    """Independent fixed-step classical RK4 shooting for theta0 at the given step."""
    t = START
    y = np.array(series(START), float)

    def rhs(t, y):
        return np.array([y[1], float(_f2(t, y[0], y[1]))])

    while True:
        k1 = rhs(t, y)
        k2 = rhs(t + step / 2, y + step / 2 * k1)
        k3 = rhs(t + step / 2, y + step / 2 * k2)
        k4 = rhs(t + step, y + step * k3)
        yn = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if yn[0] <= 0:
            break
        t, y = t + step, yn
        if t > math.pi / 2 - STOP_MARGIN:
            raise ProfileError("fixed-step integration found no zero")
    # cubic Hermite zero inside the final step
    fa, da, fb = y[0], y[1], yn[0]
    db = yn[1]

    def herm(s):
        u = s / step
        return ((2 * u ** 3 - 3 * u ** 2 + 1) * fa + (u ** 3 - 2 * u ** 2 + u) * step * da
                + (-2 * u ** 3 + 3 * u ** 2) * fb + (u ** 3 - u ** 2) * step * db)

    return t + brentq(herm, 0.0, step, xtol=1e-16)


def rk4_cross_check(step=1e-3):
    """theta0 from RK4 at ``step`` and ``step/2`` with Richardson extrapolation (order 4)."""
    a, b = rk4_theta0(step), rk4_theta0(step / 2)
    return {"coarse": a, "fine": b, "extrapolated": b + (b - a) / 15.0}


@functools.lru_cache(maxsize=4)
def default_profile(step=1e-3, tol=1e-10) -> SphericalProfile:
    return solve_profile_ode(step, tol)


# ---------------------------------------------------------------------------
# the homogeneous solution on the cone


def _block_angle(x):
    x = np.atleast_2d(np.asarray(x, float))
    a, b = x[:, :2], x[:, 2:4]
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    return x[:, :4], na, nb, np.arctan2(nb, na)


def hong_value(profile: SphericalProfile, x):
    """``r tau f(theta)`` inside the cone, 0 outside; extra coordinates beyond 4 are ignored."""
    _, na, nb, th = _block_angle(x)
    r = np.hypot(na, nb)
    inside = th < profile.theta0
    f = profile.value(np.minimum(th, profile.theta0))
    return np.where(inside, r * profile.tau * f, 0.0)


def hong_gradient(profile: SphericalProfile, x, inside_limit=True):
    """Cartesian gradient ``tau (f e_r + f' e_theta)``; at theta = theta0 the inside limit is used."""
    x = np.atleast_2d(np.asarray(x, float))
    y, na, nb, th = _block_angle(x)
    r = np.hypot(na, nb)
    if np.any(r < 1e-300):
        raise VertexError("gradient undefined at the vertex")
    f, fp, _ = profile.evaluate(np.minimum(th, profile.theta0))
    a = y[:, :2] / np.where(na > 0, na, 1.0)[:, None]
    b = y[:, 2:4] / np.where(nb > 0, nb, 1.0)[:, None]
    st, ct = np.sin(th)[:, None], np.cos(th)[:, None]
    e_r = y / r[:, None]
    e_th = np.concatenate([-st * a, ct * b], axis=1)
    g = profile.tau * (f[:, None] * e_r + fp[:, None] * e_th)
    outside = th > profile.theta0 if inside_limit else th >= profile.theta0
    g[outside] = 0.0
    out = np.zeros_like(x)
    out[:, :4] = g
    return out


def hong_h(profile: SphericalProfile, xi):
    """Poisson kernel ``|grad v|`` at boundary points (inside limit)."""
    return np.linalg.norm(hong_gradient(profile, xi), axis=1)


def kp_value(x):
    """Harmonic, 1-homogeneous solution on the KP cone: ``(|x'|^2 - w^2) / (2 sqrt2 |x'|)``."""
    x = np.atleast_2d(np.asarray(x, float))
    rho = np.linalg.norm(x[:, :3], axis=1)
    w = x[:, 3]
    inside = rho > np.abs(w)
    val = (rho * rho - w * w) / (2 * math.sqrt(2) * np.where(rho > 0, rho, 1.0))
    return np.where(inside, val, 0.0)


def kp_gradient(x):
    x = np.atleast_2d(np.asarray(x, float))
    rho = np.linalg.norm(x[:, :3], axis=1)
    if np.any(rho < 1e-300):
        raise VertexError("gradient undefined on the axis |x'| = 0")
    w = x[:, 3]
    t = w / rho
    c = 2 * math.sqrt(2)
    out = np.zeros_like(x)
    out[:, :3] = ((1 + t * t) / c)[:, None] * x[:, :3] / rho[:, None]
    out[:, 3] = -2 * t / c
    out[rho < np.abs(w)] = 0.0
    return out


@dataclass(frozen=True)
class ExplicitSolution:
    """A positive harmonic function vanishing on the boundary, normalized so its Poisson kernel is 1."""
    domain: Domain
    value: callable
    gradient: callable
    label: str


def explicit_solution(domain: Domain, profile: Optional[SphericalProfile] = None) -> ExplicitSolution:
    """Closed-form pole-at-infinity solutions for the half-space, KP and Hong cones (and products)."""
    if domain.scale != 1.0 or np.any(domain.shift != 0):
        raise DomainError("explicit solutions are defined for unrescaled domains")
    if domain.code == HALFSPACE:
        c, nv = domain.params[0], domain.params[1:]
        return ExplicitSolution(domain, lambda x: np.maximum(np.atleast_2d(x) @ nv - c, 0.0),
                                lambda x: np.where((np.atleast_2d(x) @ nv - c)[:, None] >= 0,
                                                   nv, 0.0) * np.ones((len(np.atleast_2d(x)), 1)),
                                "halfspace")
    if domain.code == BLOCKCONE:
        k, m, t0 = domain.params
        if (int(k), int(m)) == (3, 4) and abs(t0 - math.pi / 4) < 1e-15:
            return ExplicitSolution(domain, kp_value, kp_gradient, "kp_cone")
        if (int(k), int(m)) == (2, 4):
            prof = profile or default_profile()
            if abs(prof.theta0 - t0) > 1e-9:
                raise DomainError("cone aperture does not match the profile root")
            return ExplicitSolution(domain, functools.partial(hong_value, prof),
                                    functools.partial(hong_gradient, prof), "hong_cone")
    raise DomainError(f"no explicit solution for kind {domain.kind!r}")


# ---------------------------------------------------------------------------
# verification


def laplacian_9pt(fn, x, h):
    """Second-order 9-point (2d + 1 in R^4) finite-difference Laplacian."""
    x = np.atleast_2d(x)
    d = x.shape[1]
    centre = fn(x)
    acc = -2 * d * centre
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        acc = acc + fn(x + e) + fn(x - e)
    return acc / (h * h)


def interior_points(theta0, count, seed, margin=0.1, radius=(0.5, 1.5)):
    """Random R^4 points with block angle in [0, theta0 - margin] and |x| in ``radius``."""
    rng = np.random.default_rng([seed, 0xC0E5])
    th = rng.uniform(0, theta0 - margin, count)
    r = rng.uniform(*radius, count)
    p1, p2 = rng.uniform(0, 2 * math.pi, (2, count))
    return np.stack([r * np.cos(th) * np.cos(p1), r * np.cos(th) * np.sin(p1),
                     r * np.sin(th) * np.cos(p2), r * np.sin(th) * np.sin(p2)], axis=1)


@dataclass(frozen=True)
class OverdeterminedReport:
    eigen_residual: float
    bc_residual: float
    laplacian_residual: dict
    laplacian_order: float
    theta0: float
    tau: float
    rk4: dict
    theta0_agreement: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


D6 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0


def ode_residual(profile: SphericalProfile, sample_count=200, seed=0, stride=10):
    """max |(sc f')' + 3 sc f| at sampled uniform-grid nodes, with sc = sin cos.

    The flux ``sc f'`` is differentiated by a sixth-order central stencil of
    spacing ``stride`` grid steps, so the value reflects the solver data rather
    than interpolation round-off.
    """
    g = profile.grid[1:]
    flux = np.sin(g) * np.cos(g) * profile.f_prime[1:]
    h = (g[-1] - g[0]) / (len(g) - 1)
    lo, hi = 3 * stride, len(g) - 1 - 3 * stride
    rng = np.random.default_rng([seed, 0xE16E])
    idx = np.unique(rng.integers(lo, hi + 1, sample_count))
    deriv = sum(c * flux[idx + (j - 3) * stride] for j, c in enumerate(D6)) / (stride * h)
    th = g[idx]
    return float(np.max(np.abs(deriv + EIGENVALUE * np.sin(th) * np.cos(th) * profile.f[1:][idx])))


def verify_overdetermined(profile: SphericalProfile, sample_count=200, seed=0,
                          steps=(0.02, 0.01, 0.005)) -> OverdeterminedReport:
    """ODE residual of the interpolated profile, boundary normalization and FD harmonicity of v."""
    eigen = ode_residual(profile, sample_count, seed)
    bc = abs(abs(profile.tau * profile.f_prime_at_theta0) - 1.0)
    pts = interior_points(profile.theta0, sample_count, seed)
    v = functools.partial(hong_value, profile)
    lap = {float(h): float(np.max(np.abs(laplacian_9pt(v, pts, h)))) for h in steps}
    hs = np.array(sorted(lap))
    vals = np.array([lap[h] for h in hs])
    order = float(np.polyfit(np.log(hs), np.log(vals), 1)[0])
    rk = rk4_cross_check()
    return OverdeterminedReport(eigen, bc, {str(k): v for k, v in lap.items()}, order,
                                profile.theta0, profile.tau, rk,
                                abs(rk["extrapolated"] - profile.theta0))


def product_extend(base: Domain, extra_dims: int) -> Domain:
    """``base x R^extra_dims`` with normals lifted by zero components."""
    return product_cone(base, extra_dims)


def profile_from_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, 0], data[:, 1], data[:, 2]
