"""Implicit domains with analytic fast paths.

Every domain is an open set ``{phi > 0}`` in R^d.  The built-in kinds carry an
exact signed distance (positive inside).  Rescaled copies are represented by
an affine pull-back ``y = scale * x + shift`` into the frame of the base kind,
so rescaling never degrades the analytic formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .._accel import njit

HALFSPACE, BLOCKCONE, GRAPH, IMPLICIT = 0, 1, 2, 3

KINDS = ("halfspace", "kp_cone", "hong_cone", "product_cone", "perturbed_graph", "implicit")

VERTEX_EXCLUSION = 1e-9


class DomainError(ValueError):
    pass


class VertexError(DomainError):
    """Raised for boundary-local operations at a conical vertex."""


@dataclass(frozen=True, eq=False)
class Domain:
    """Immutable description of an open set in R^d.

    ``kind`` is the user-facing name; ``code``/``params`` drive the compiled
    distance kernel.  Block cones cover the KP cone, the Hong cone and their
    products with R^k: the set ``{angle(|y[k:m]|, |y[:k]|) < theta0}``.
    """

    kind: str
    dim: int
    code: int
    params: np.ndarray
    shift: np.ndarray
    scale: float = 1.0
    meta: dict = field(default_factory=dict)
    fn: Optional[Callable] = None

    # -- frames ---------------------------------------------------------
    def to_base(self, x):
        return self.scale * np.asarray(x, dtype=float) + self.shift

    def from_base(self, y):
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    @property
    def is_cone(self):
        return self.code == BLOCKCONE

    @property
    def n(self):
        """Boundary dimension."""
        return self.dim - 1

    def vertex(self):
        """A vertex point of a conical kind, else None."""
        if self.code != BLOCKCONE:
            return None
        return self.from_base(np.zeros(self.dim))

    def dist_to_vertex(self, x):
        """Distance to the vertex set (the subspace y[:m] = 0 for products)."""
        x = np.atleast_2d(np.asarray(x, float))
        if self.code != BLOCKCONE:
            return np.full(len(x), np.inf)
        m = int(self.params[1])
        y = self.to_base(x)
        return np.linalg.norm(y[:, :m], axis=1) / self.scale

    # -- evaluation -----------------------------------------------------
    def phi(self, x):
        """Defining function (positive inside), vectorized over rows."""
        if self.code == IMPLICIT:
            x = np.atleast_2d(np.asarray(x, float))
            return np.asarray(self.fn(self.to_base(x)), float)
        if self.code == GRAPH:
            y = self.to_base(np.atleast_2d(np.asarray(x, float)))
            a, k = self.params[0], self.params[1]
            return (y[:, -1] - a * np.cos(k * y[:, 0])) / self.scale
        return self.signed_distance(x)

    def contains(self, x):
        return self.phi(x) > 0

    def signed_distance(self, x):
        """Exact signed distance for built-in kinds; ``phi/Lip`` for implicit ones."""
        x = np.atleast_2d(np.asarray(x, float))
        y = self.to_base(x)
        c, p = self.code, self.params
        if c == HALFSPACE:
            s = y @ p[1:] - p[0]
        elif c == BLOCKCONE:
            s = _cone_sd(y, p)
        elif c == GRAPH:
            s = _graph_sd(y, p[0], p[1])
        else:
            s = np.asarray(self.fn(y), float) / self.meta["lipschitz"]
        return s / self.scale

    def distance_bound(self, x):
        """Certified lower bound on |distance| with the sign of phi (walk radii)."""
        if self.code != GRAPH:
            return self.signed_distance(x)
        y = self.to_base(np.atleast_2d(np.asarray(x, float)))
        a, k = self.params[0], self.params[1]
        return (y[:, -1] - a * np.cos(k * y[:, 0])) / math.sqrt(1.0 + (a * k) ** 2) / self.scale

    def outer_normal(self, xi, check_vertex=True):
        """Outward unit normal; for off-boundary points, the normal at the nearest boundary point."""
        xi = np.atleast_2d(np.asarray(xi, float))
        if check_vertex and self.code == BLOCKCONE:
            dv = self.dist_to_vertex(xi)
            scale_ref = np.maximum(np.linalg.norm(xi, axis=1), 1.0)
            if np.any(dv <= VERTEX_EXCLUSION * scale_ref):
                raise VertexError("outer normal undefined at a cone vertex")
        y = self.to_base(xi)
        c, p = self.code, self.params
        if c == HALFSPACE:
            nrm = np.broadcast_to(-p[1:], y.shape).copy()
        elif c == BLOCKCONE:
            nrm = _cone_normal(y, p)
        elif c == GRAPH:
            t = _graph_foot(y, p[0], p[1])
            g = np.zeros_like(y)
            g[:, 0] = p[0] * p[1] * np.sin(p[1] * t)
            g[:, -1] = 1.0
            nrm = -g / np.linalg.norm(g, axis=1, keepdims=True)
        else:
            g = _fd_gradient(lambda z: self.fn(z), y, 1e-6 * max(1.0, float(np.max(np.abs(y)))))
            nrm = -g / np.linalg.norm(g, axis=1, keepdims=True)
        return nrm

    def project(self, x, iterations=8):
        """Nearest boundary point (exact for built-in kinds, Newton on phi otherwise)."""
        x = np.atleast_2d(np.asarray(x, float))
        y = self.to_base(x)
        c, p = self.code, self.params
        if c == HALFSPACE:
            nv = p[1:]
            y = y - np.outer(y @ nv - p[0], nv)
        elif c == BLOCKCONE:
            y = _cone_project(y, p)
        elif c == GRAPH:
            t = _graph_foot(y, p[0], p[1])
            y = y.copy()
            y[:, 0] = t
            y[:, -1] = p[0] * np.cos(p[1] * t)
        else:
            h = 1e-7 * max(1.0, float(np.max(np.abs(y))))
            for _ in range(iterations):
                f = np.asarray(self.fn(y), float)
                g = _fd_gradient(self.fn, y, h)
                y = y - (f / np.maximum(np.sum(g * g, axis=1), 1e-300))[:, None] * g
        return self.from_base(y)

    def describe(self):
        d = {"kind": self.kind, "dim": self.dim}
        d.update({k: v for k, v in self.meta.items() if k not in ("lipschitz",) and _jsonable(v)})
        if self.scale != 1.0 or np.any(self.shift != 0):
            d["scale"] = float(self.scale)
            d["shift"] = [float(v) for v in self.shift]
        return d


def _jsonable(v):
    return isinstance(v, (int, float, str, list, tuple, bool))


# ---------------------------------------------------------------------------
# constructors


def halfspace(dim=3, normal=None, offset=0.0):
    """``{x : normal . x > offset}``; ``normal`` is the inward unit normal (default e_d)."""
    _check_dim(dim)
    nv = np.zeros(dim)
    if normal is None:
        nv[-1] = 1.0
    else:
        nv = np.asarray(normal, float)
        if nv.shape != (dim,) or not np.all(np.isfinite(nv)) or np.linalg.norm(nv) == 0:
            raise DomainError("halfspace normal must be a nonzero vector of length dim")
        nv = nv / np.linalg.norm(nv)
    p = np.concatenate([[float(offset)], nv])
    return Domain("halfspace", dim, HALFSPACE, p, np.zeros(dim),
                  meta={"normal": nv.tolist(), "offset": float(offset)})


def block_cone(k, m, theta0, extra_dims=0, kind="block_cone", meta=None):
    if not 0.0 < theta0 < math.pi / 2:
        raise DomainError("theta0 must lie in (0, pi/2)")
    if extra_dims < 0:
        raise DomainError("extra_dims must be >= 0")
    dim = m + extra_dims
    md = {"split": k, "base_dim": m, "theta0": float(theta0), "extra_dims": int(extra_dims)}
    md.update(meta or {})
    return Domain(kind, dim, BLOCKCONE, np.array([k, m, theta0], float), np.zeros(dim), meta=md)


def kp_cone():
    """The cone ``{x1^2 + x2^2 + x3^2 > x4^2}`` in R^4."""
    return block_cone(3, 4, math.pi / 4, kind="kp_cone")


def hong_cone(theta0=None):
    """The cone ``{x1^2 + x2^2 > (x3^2 + x4^2) cot^2 theta0}`` in R^4.

    With ``theta0=None`` the root of the spherical profile is computed (and cached).
    """
    if theta0 is None:
        from ..cones import default_profile

        theta0 = default_profile().theta0
    return block_cone(2, 4, float(theta0), kind="hong_cone")


def product_cone(base, extra_dims):
    """``base x R^extra_dims``; membership ignores the appended coordinates."""
    if extra_dims < 1:
        raise DomainError("extra_dims must be >= 1")
    if base.scale != 1.0 or np.any(base.shift != 0):
        raise DomainError("product_cone expects an unrescaled base domain")
    if base.code == BLOCKCONE:
        k, m, t0 = base.params
        total = int(base.meta.get("extra_dims", 0)) + extra_dims
        return block_cone(int(k), int(m), float(t0), extra_dims=total, kind="product_cone",
                          meta={"base_kind": base.meta.get("base_kind", base.kind)})
    if base.code == HALFSPACE:
        nv = np.concatenate([base.params[1:], np.zeros(extra_dims)])
        d = halfspace(base.dim + extra_dims, nv, base.params[0])
        return d
    raise DomainError(f"product extension not supported for kind {base.kind!r}")


def perturbed_graph(dim=3, amplitude=0.1, frequency=1.0):
    """``{x_d > amplitude * cos(frequency * x_1)}``."""
    _check_dim(dim)
    if frequency <= 0 or not math.isfinite(amplitude):
        raise DomainError("perturbed_graph needs finite amplitude and frequency > 0")
    return Domain("perturbed_graph", dim, GRAPH, np.array([amplitude, frequency], float),
                  np.zeros(dim), meta={"amplitude": float(amplitude), "frequency": float(frequency)})


def implicit(dim, fn, lipschitz):
    """Generic ``{fn > 0}``; ``fn`` maps an (N, d) array to N values with Lipschitz bound ``lipschitz``."""
    if lipschitz <= 0:
        raise DomainError("lipschitz bound must be positive")
    return Domain("implicit", dim, IMPLICIT, np.zeros(0), np.zeros(dim),
                  meta={"lipschitz": float(lipschitz)}, fn=fn)


def rescale(domain, center, radius):
    """The domain ``(domain - center) / radius`` (pull-back ``y = radius x + center``)."""
    if radius <= 0:
        raise DomainError("radius must be positive")
    center = np.asarray(center, float)
    return replace(domain, shift=domain.shift + domain.scale * center, scale=domain.scale * radius)


def make_domain(spec):
    """Build a domain from a declarative record ``{"kind": ..., params...}`` or a bare kind name."""
    if isinstance(spec, Domain):
        return spec
    spec = {"kind": spec} if isinstance(spec, str) else dict(spec)
    kind = spec.pop("kind", None)
    if kind == "halfspace":
        dim = int(spec.get("dim", 3))
        return halfspace(dim, spec.get("normal"), float(spec.get("offset", 0.0)))
    if kind == "kp_cone":
        return kp_cone()
    if kind == "hong_cone":
        return hong_cone(spec.get("theta0"))
    if kind == "product_cone":
        base = make_domain(spec.get("base", {"kind": "hong_cone"}))
        return product_cone(base, int(spec.get("extra_dims", 1)))
    if kind == "perturbed_graph":
        return perturbed_graph(int(spec.get("dim", 3)), float(spec.get("amplitude", 0.1)),
                               float(spec.get("frequency", 1.0)))
    if kind == "implicit":
        return implicit(int(spec["dim"]), spec["fn"], float(spec["lipschitz"]))
    raise DomainError(f"unknown domain kind {kind!r}; supported kinds: {', '.join(KINDS)}")


def _check_dim(dim):
    if dim not in (3, 4, 5):
        raise DomainError("dimension must be 3, 4 or 5")


# ---------------------------------------------------------------------------
# vectorized kernels (base frame)


def _blocks(y, p):
    k, m = int(p[0]), int(p[1])
    ya, yb = y[:, :k], y[:, k:m]
    ra = np.linalg.norm(ya, axis=1)
    rb = np.linalg.norm(yb, axis=1)
    return ya, yb, ra, rb


def _cone_sd(y, p):
    _, _, ra, rb = _blocks(y, p)
    return np.hypot(ra, rb) * np.sin(p[2] - np.arctan2(rb, ra))


def _unit_or_default(v, r):
    out = np.zeros_like(v)
    ok = r > 0
    out[ok] = v[ok] / r[ok, None]
    out[~ok, 0] = 1.0
    return out


def _cone_normal(y, p):
    k, m, t0 = int(p[0]), int(p[1]), p[2]
    ya, yb, ra, rb = _blocks(y, p)
    a = _unit_or_default(ya, ra)
    b = _unit_or_default(yb, rb)
    nrm = np.zeros_like(y)
    nrm[:, :k] = -math.sin(t0) * a
    nrm[:, k:m] = math.cos(t0) * b
    return nrm


def _cone_project(y, p):
    k, m, t0 = int(p[0]), int(p[1]), p[2]
    ya, yb, ra, rb = _blocks(y, p)
    a = _unit_or_default(ya, ra)
    b = _unit_or_default(yb, rb)
    alpha = np.arctan2(rb, ra)
    rho = np.hypot(ra, rb) * np.maximum(np.cos(t0 - alpha), 0.0)
    out = y.copy()
    out[:, :k] = (rho * math.cos(t0))[:, None] * a
    out[:, k:m] = (rho * math.sin(t0))[:, None] * b
    return out


def _graph_foot(y, a, k, samples=65, newton=6):
    """x_1 coordinate of the nearest graph point (the problem is 2-d in (x_1, x_d))."""
    y0, yd = y[:, 0], y[:, -1]
    v = np.abs(yd - a * np.cos(k * y0)) + 1e-300
    s = np.linspace(-1.0, 1.0, samples)
    t = y0[:, None] + v[:, None] * s[None, :]
    dist2 = (t - y0[:, None]) ** 2 + (a * np.cos(k * t) - yd[:, None]) ** 2
    tb = t[np.arange(len(y0)), np.argmin(dist2, axis=1)]
    for _ in range(newton):
        g = a * np.cos(k * tb)
        g1 = -a * k * np.sin(k * tb)
        g2 = -a * k * k * np.cos(k * tb)
        d1 = (tb - y0) + (g - yd) * g1
        d2 = 1.0 + g1 * g1 + (g - yd) * g2
        step = np.where(d2 > 1e-12, d1 / np.where(d2 > 1e-12, d2, 1.0), 0.0)
        tb = tb - np.clip(step, -v, v)
    return tb


def _graph_sd(y, a, k):
    t = _graph_foot(y, a, k)
    y0, yd = y[:, 0], y[:, -1]
    dist = np.hypot(t - y0, a * np.cos(k * t) - yd)
    return np.sign(yd - a * np.cos(k * y0)) * dist


def _fd_gradient(fn, y, h):
    g = np.empty_like(y)
    for j in range(y.shape[1]):
        e = np.zeros(y.shape[1])
        e[j] = h
        g[:, j] = (np.asarray(fn(y + e), float) - np.asarray(fn(y - e), float)) / (2 * h)
    return g


# ---------------------------------------------------------------------------
# scalar kernel for compiled walkers


@njit
def distance_point(code, p, shift, scale, x):
    """Walk-safe signed distance at one point (exact except for graphs: a lower bound)."""
    d = x.shape[0]
    if code == HALFSPACE:
        s = -p[0]
        for i in range(d):
            s += p[i + 1] * (scale * x[i] + shift[i])
        return s / scale
    if code == BLOCKCONE:
        k = int(p[0])
        m = int(p[1])
        ra = 0.0
        rb = 0.0
        for i in range(k):
            v = scale * x[i] + shift[i]
            ra += v * v
        for i in range(k, m):
            v = scale * x[i] + shift[i]
            rb += v * v
        ra = math.sqrt(ra)
        rb = math.sqrt(rb)
        return math.hypot(ra, rb) * math.sin(p[2] - math.atan2(rb, ra)) / scale
    # graph
    y0 = scale * x[0] + shift[0]
    yd = scale * x[d - 1] + shift[d - 1]
    return (yd - p[0] * math.cos(p[1] * y0)) / math.sqrt(1.0 + (p[0] * p[1]) ** 2) / scale
