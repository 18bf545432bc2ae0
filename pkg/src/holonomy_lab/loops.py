"""Loops, lengths, dilations and moment integrals.

A loop is a closed piecewise-C^1 curve ``t -> gamma(t)`` on ``[0, 1]`` in
chart coordinates, given by vectorized ``position`` and ``velocity``
callables together with the interior times where it may have kinks.

Every expansion coefficient is paired with a *moment*

    M(mu, j) = int_gamma prod_{i in mu} (z_i - x_i) dz_j,

computed with composite Gauss-Legendre quadrature on each smooth piece.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ChartDomainError, PreconditionError

__all__ = [
    "DilationStructure",
    "LoopPath",
    "TrigLoop",
    "PolygonLoop",
    "FunctionLoop",
    "circle",
    "polygon",
    "figure_eight",
    "lissajous",
    "dilate_loop",
    "reverse",
    "concatenate",
    "reparametrize",
    "length",
    "speed",
    "moment_integral",
    "moment_table",
    "radial_disk_integral",
    "disk_monomial",
    "gauss_legendre",
]

_GL_ORDER = 16


def gauss_legendre(a, b, panels, order=_GL_ORDER):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    nodes = (edges[:-1, None] + half * (x[None] + 1.0)).ravel()
    weights = (half * w[None]).ravel()
    return nodes, weights


# ---------------------------------------------------------------------------
# dilations

@dataclass(frozen=True)
class DilationStructure:
    """Anisotropic dilations ``delta_s(z) = x + s^w (z - x)``.

    Parameters
    ----------
    weights : tuple of int
        Nondecreasing positive weights, one per coordinate.
    center : array_like, optional
        Centre ``x``; the origin by default.
    """

    weights: tuple
    center: tuple = None

    def __post_init__(self):
        w = tuple(int(v) for v in self.weights)
        if any(v < 1 for v in w):
            raise PreconditionError("weights must be positive integers")
        if any(b < a for a, b in zip(w, w[1:])):
            raise PreconditionError("weights must be nondecreasing")
        object.__setattr__(self, "weights", w)
        c = (0.0,) * len(w) if self.center is None else tuple(float(v) for v in self.center)
        if len(c) != len(w):
            raise PreconditionError("center has the wrong dimension")
        object.__setattr__(self, "center", c)

    @classmethod
    def euclidean(cls, n, center=None):
        return cls((1,) * n, center)

    @property
    def dim(self):
        return len(self.weights)

    @property
    def step(self):
        return max(self.weights)

    @property
    def w(self):
        return np.array(self.weights, dtype=float)

    @property
    def x(self):
        return np.array(self.center, dtype=float)

    def factors(self, s):
        return np.asarray(s, dtype=float)[..., None] ** self.w

    def dilate(self, z, s):
        z = np.asarray(z, dtype=float)
        return self.x + self.factors(s) * (z - self.x)

    def radial_field(self, z):
        """Coefficients of ``S = sum_i w_i (z_i - x_i) d/dz_i``."""
        return self.w * (np.asarray(z, dtype=float) - self.x)

    def weight(self, exponent):
        """Weight of a monomial given by an exponent vector."""
        return sum(w * e for w, e in zip(self.weights, exponent))

    def index_weight(self, mu):
        """Weight of a multi-index given as a tuple of coordinate indices."""
        return sum(self.weights[i] for i in mu)


# ---------------------------------------------------------------------------
# loops

class LoopPath:
    """Closed piecewise-C^1 loop on ``[0, 1]``.

    Subclasses provide ``position(t)`` and ``velocity(t)`` for arrays of
    times of shape (T,), returning (T, n).

    Attributes
    ----------
    dim : int
    breakpoints : tuple of float
        Interior kinks; quadrature and integrators split there.
    metric : ModelSpace or None
        Geometry measuring lengths; ``None`` means the Euclidean chart metric.
    """

    dim = None
    breakpoints = ()
    metric = None

    def position(self, t):
        raise NotImplementedError

    def velocity(self, t):
        raise NotImplementedError

    def __call__(self, t):
        return self.position(np.atleast_1d(np.asarray(t, dtype=float)))

    @property
    def basepoint(self):
        return self.position(np.array([0.0]))[0]

    def closure_error(self):
        p = self.position(np.array([0.0, 1.0]))
        return float(np.linalg.norm(p[1] - p[0]))

    def pieces(self):
        edges = np.unique(np.concatenate([[0.0, 1.0], np.asarray(self.breakpoints, dtype=float)]))
        return list(zip(edges[:-1], edges[1:]))

    def nodes(self, panels=4, order=_GL_ORDER):
        """Quadrature nodes and weights covering every smooth piece."""
        ts, ws = [], []
        for a, b in self.pieces():
            t, w = gauss_legendre(a, b, panels, order)
            ts.append(t)
            ws.append(w)
        return np.concatenate(ts), np.concatenate(ws)

    def with_metric(self, metric):
        return FunctionLoop(self.position, self.velocity, self.dim, self.breakpoints, metric)


class FunctionLoop(LoopPath):
    """Loop from user callables."""

    def __init__(self, position, velocity, dim, breakpoints=(), metric=None):
        self._position = position
        self._velocity = velocity
        self.dim = int(dim)
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.metric = metric

    def position(self, t):
        return np.asarray(self._position(np.asarray(t, dtype=float)), dtype=float)

    def velocity(self, t):
        return np.asarray(self._velocity(np.asarray(t, dtype=float)), dtype=float)


class TrigLoop(LoopPath):
    """Trigonometric polynomial loop.

    ``gamma(t) = offset + sum_k a_k cos(2 pi k t) + b_k sin(2 pi k t)`` for
    ``k = 1..K``; ``a`` and ``b`` have shape (K, n).
    """

    def __init__(self, offset, a, b, metric=None):
        self.offset = np.asarray(offset, dtype=float)
        self.a = np.atleast_2d(np.asarray(a, dtype=float))
        self.b = np.atleast_2d(np.asarray(b, dtype=float))
        self.dim = self.offset.shape[0]
        self.metric = metric
        self.breakpoints = ()

    @property
    def _k(self):
        return np.arange(1, self.a.shape[0] + 1)

    def position(self, t):
        arg = 2 * np.pi * np.asarray(t, dtype=float)[:, None] * self._k
        return self.offset + np.cos(arg) @ self.a + np.sin(arg) @ self.b

    def velocity(self, t):
        arg = 2 * np.pi * np.asarray(t, dtype=float)[:, None] * self._k
        k = 2 * np.pi * self._k
        return -(np.sin(arg) * k) @ self.a + (np.cos(arg) * k) @ self.b

    def fourier(self):
        """Complex coefficients ``c_k`` for ``k = -K..K`` with ``gamma = sum c_k e^{2 pi i k t}``."""
        K = self.a.shape[0]
        c = np.zeros((2 * K + 1, self.dim), dtype=complex)
        c[K] = self.offset
        c[K + 1:] = 0.5 * (self.a - 1j * self.b)
        c[:K] = (0.5 * (self.a + 1j * self.b))[::-1]
        return c

    @classmethod
    def from_fourier(cls, c, metric=None):
        K = (c.shape[0] - 1) // 2
        pos = c[K + 1:]
        neg = c[:K][::-1]
        a = np.real(pos + neg)
        b = np.real(1j * (pos - neg))
        return cls(np.real(c[K]), a, b, metric)


class PolygonLoop(LoopPath):
    """Closed polygon; edge ``i`` is traversed on ``[i/m, (i+1)/m]``."""

    def __init__(self, vertices, metric=None):
        self.vertices = np.asarray(vertices, dtype=float)
        m, self.dim = self.vertices.shape
        self.metric = metric
        self.breakpoints = tuple(np.arange(1, m) / m)

    def _locate(self, t):
        m = self.vertices.shape[0]
        u = np.clip(np.asarray(t, dtype=float), 0.0, 1.0) * m
        idx = np.minimum(np.floor(u).astype(int), m - 1)
        return idx, u - idx

    def position(self, t):
        idx, frac = self._locate(t)
        p0 = self.vertices[idx]
        p1 = self.vertices[(idx + 1) % len(self.vertices)]
        return p0 + frac[:, None] * (p1 - p0)

    def velocity(self, t):
        idx, _ = self._locate(t)
        m = len(self.vertices)
        return m * (self.vertices[(idx + 1) % m] - self.vertices[idx])

    def signed_area(self, i=0, j=1):
        """Shoelace formula in the (i, j) coordinate plane."""
        x, y = self.vertices[:, i], self.vertices[:, j]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


# ---------------------------------------------------------------------------
# presets

def _embed(planar, dim, plane):
    out = np.zeros(planar.shape[:-1] + (dim,))
    out[..., plane[0]] = planar[..., 0]
    out[..., plane[1]] = planar[..., 1]
    return out


def circle(radius, basepoint=None, dim=2, plane=(0, 1)):
    """Counterclockwise circle through ``basepoint`` (the origin by default)."""
    x = np.zeros(dim) if basepoint is None else np.asarray(basepoint, dtype=float)
    a = _embed(np.array([[radius, 0.0]]), dim, plane)
    b = _embed(np.array([[0.0, radius]]), dim, plane)
    return TrigLoop(x - a[0], a, b)


def figure_eight(radius, skew=0.0, basepoint=None, dim=2, plane=(0, 1), bend=0.0):
    """Figure-eight through ``basepoint``.

    ``x = r sin(a)``, ``y = r (sin(2a)/2 + skew (1 - cos a) + bend (1 - cos 2a))``
    with ``a = 2 pi t``.  Its signed area is ``skew * pi * r**2``, so
    ``skew = 0`` gives loops that lift to closed horizontal curves.  With
    ``bend = 0`` the loop is odd under ``t -> 1 - t``, which makes every
    even-degree moment vanish; a nonzero ``bend`` removes that symmetry.
    """
    x = np.zeros(dim) if basepoint is None else np.asarray(basepoint, dtype=float)
    a = _embed(np.array([[0.0, -skew * radius], [0.0, -bend * radius]]), dim, plane)
    b = _embed(np.array([[radius, 0.0], [0.0, 0.5 * radius]]), dim, plane)
    offset = x + _embed(np.array([0.0, (skew + bend) * radius]), dim, plane)
    return TrigLoop(offset, a, b)


def lissajous(radius, p=1, q=2, phase=0.0, basepoint=None, dim=2, plane=(0, 1)):
    """Lissajous loop ``(r sin(2 pi p t), r sin(2 pi q t + phase) - r sin(phase))``."""
    x = np.zeros(dim) if basepoint is None else np.asarray(basepoint, dtype=float)
    K = max(p, q)
    a = np.zeros((K, 2))
    b = np.zeros((K, 2))
    b[p - 1, 0] = radius
    a[q - 1, 1] = radius * math.sin(phase)
    b[q - 1, 1] = radius * math.cos(phase)
    offset = x + _embed(np.array([0.0, -radius * math.sin(phase)]), dim, plane)
    return TrigLoop(offset, _embed(a, dim, plane), _embed(b, dim, plane))


def polygon(vertices):
    return PolygonLoop(vertices)


# ---------------------------------------------------------------------------
# transformations

def dilate_loop(loop, d, s):
    """The loop ``t -> delta_s(gamma(t))``.

    Raises
    ------
    PreconditionError
        If ``s`` is not in ``(0, 1]``.
    """
    if not 0.0 < s <= 1.0:
        raise PreconditionError(f"dilation factor {s} outside (0, 1]")
    fac = d.factors(s)
    x = d.x
    if isinstance(loop, TrigLoop):
        return TrigLoop(x + fac * (loop.offset - x), loop.a * fac, loop.b * fac, loop.metric)
    if isinstance(loop, PolygonLoop):
        return PolygonLoop(x + fac * (loop.vertices - x), loop.metric)
    return FunctionLoop(lambda t: x + fac * (loop.position(t) - x),
                        lambda t: fac * loop.velocity(t),
                        loop.dim, loop.breakpoints, loop.metric)


def reverse(loop):
    return FunctionLoop(lambda t: loop.position(1.0 - np.asarray(t)),
                        lambda t: -loop.velocity(1.0 - np.asarray(t)),
                        loop.dim, tuple(1.0 - b for b in loop.breakpoints), loop.metric)


def concatenate(first, second):
    """Loop running ``first`` on [0, 1/2] then ``second`` on [1/2, 1]."""

    def pick(f1, f2, scale):
        def fn(t):
            t = np.asarray(t, dtype=float)
            out = np.empty(t.shape + (first.dim,))
            lo = t < 0.5
            out[lo] = scale * f1(2 * t[lo])
            out[~lo] = scale * f2(2 * t[~lo] - 1.0)
            return out
        return fn

    bps = tuple(0.5 * b for b in first.breakpoints) + (0.5,) + tuple(
        0.5 + 0.5 * b for b in second.breakpoints)
    return FunctionLoop(pick(first.position, second.position, 1.0),
                        pick(first.velocity, second.velocity, 2.0),
                        first.dim, bps, first.metric)


def reparametrized(loop, phi, dphi):
    """The loop ``t -> gamma(phi(t))`` for an increasing bijection ``phi`` of [0, 1]."""
    return FunctionLoop(lambda t: loop.position(phi(np.asarray(t, dtype=float))),
                        lambda t: loop.velocity(phi(np.asarray(t, dtype=float)))
                        * dphi(np.asarray(t, dtype=float))[:, None],
                        loop.dim, (), loop.metric)


# ---------------------------------------------------------------------------
# length

def speed(loop, t):
    """``|gamma'(t)|`` in the loop's metric (``inf`` where not horizontal)."""
    t = np.asarray(t, dtype=float)
    v = loop.velocity(t)
    if loop.metric is None:
        return np.linalg.norm(v, axis=-1)
    return loop.metric.speed(loop.position(t), v)


def _adaptive(integrand_nodes, rtol, max_panels=4096, start=4):
    panels = start
    prev = integrand_nodes(panels)
    while panels < max_panels:
        panels *= 2
        cur = integrand_nodes(panels)
        scale = np.maximum(np.abs(cur[1]), 1e-300)
        if np.all(np.abs(cur[0] - prev[0]) <= rtol * scale):
            return cur[0]
        prev = cur
    return prev[0]


def length(loop, rtol=1e-10):
    """Length ``int |gamma'(t)|_g dt``; ``inf`` for non-horizontal loops."""

    def integrate(panels):
        t, w = loop.nodes(panels)
        sp = speed(loop, t)
        if not np.all(np.isfinite(sp)):
            return np.array(np.inf), np.array(np.inf)
        val = np.dot(w, sp)
        return np.array(val), np.array(abs(val))

    val = _adaptive(integrate, rtol)
    return float(val)


class _ArcLength:
    # cumulative arc length on a fine panel grid, evaluated anywhere by a
    # local Gauss-Legendre rule from the nearest panel edge
    def __init__(self, loop, panels=64):
        self.loop = loop
        self.edges = []
        for a, b in loop.pieces():
            self.edges.extend(np.linspace(a, b, panels + 1)[:-1])
        self.edges = np.array(self.edges + [1.0])
        x, w = np.polynomial.legendre.leggauss(24)
        self.x, self.w = x, w
        self.cum = np.concatenate([[0.0], np.cumsum(self._integral(self.edges[:-1], self.edges[1:]))])
        self.total = self.cum[-1]

    def _integral(self, a, b):
        half = 0.5 * (b - a)
        t = a[:, None] + half[:, None] * (self.x[None] + 1.0)
        sp = speed(self.loop, t.ravel()).reshape(t.shape)
        return half * (sp @ self.w)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.edges) - 2)
        return self.cum[k] + self._integral(self.edges[k], t)

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0, len(self.edges) - 2)
        lo, hi = self.edges[k], self.edges[k + 1]
        t = lo + (hi - lo) * (s - self.cum[k]) / np.maximum(self.cum[k + 1] - self.cum[k], 1e-300)
        for _ in range(50):
            f = self(t) - s
            step = f / speed(self.loop, t)
            t = np.clip(t - step, lo, hi)
            if np.max(np.abs(step)) < 1e-15:
                break
        return t


def reparametrize(loop):
    """Constant-speed reparametrization with ``|gamma'| = length`` everywhere."""
    arc = _ArcLength(loop)
    total = arc.total

    def phi(u):
        return arc.inverse(np.asarray(u, dtype=float) * total)

    def position(u):
        return loop.position(phi(u))

    def velocity(u):
        t = phi(u)
        return loop.velocity(t) * (total / speed(loop, t))[:, None]

    bps = tuple(float(arc(np.array([b]))[0] / total) for b in loop.breakpoints)
    return FunctionLoop(position, velocity, loop.dim, bps, loop.metric)


# ---------------------------------------------------------------------------
# moments

def _moment_values(pos, vel, x, keys):
    dz = pos - x
    out = []
    for mu, j in keys:
        f = vel[:, j].copy()
        for i in mu:
            f = f * dz[:, i]
        out.append(f)
    return np.array(out)


def moment_table(loop, x, keys, rtol=1e-12, max_panels=4096):
    """Moments ``int prod_{i in mu} (z_i - x_i) dz_j`` for many ``(mu, j)`` keys.

    Panels are doubled until two successive estimates agree to ``rtol``
    relative to the integral of the absolute integrand.

    Returns
    -------
    dict mapping each key to a float
    """
    keys = list(keys)
    if not keys:
        return {}
    x = np.asarray(x, dtype=float)

    def integrate(panels):
        t, w = loop.nodes(panels)
        vals = _moment_values(loop.position(t), loop.velocity(t), x, keys)
        return vals @ w, np.abs(vals) @ w

    res = _adaptive(integrate, rtol, max_panels)
    return {k: float(v) for k, v in zip(keys, res)}


def moment_integral(loop, x, mu, j):
    """Single moment ``int_gamma prod_{i in mu}(z_i - x_i) dz_j``."""
    key = (tuple(mu), int(j))
    return moment_table(loop, x, [key])[key]


def disk_monomial(exponent, i, j, d):
    """Moment-form of the radial disk integral of ``(z - x)^e dz_i ^ dz_j``.

    Returns a list of ``(factor, mu, k)`` with rational factors such that the
    disk integral equals ``sum factor * M(mu, k)``.
    """
    m = d.weight(exponent) + d.weights[i] + d.weights[j]
    mu = tuple(k for k, e in enumerate(exponent) for _ in range(e))
    return [(Fraction(d.weights[i], m), tuple(sorted(mu + (i,))), j),
            (Fraction(-d.weights[j], m), tuple(sorted(mu + (j,))), i)]


def radial_disk_integral(alpha, loop, d, chart_radius=np.inf, rtol=1e-12, max_panels=256):
    """Integral of a two-form over the radial filling disk of ``loop``.

    The disk is ``(s, t) -> delta_s(gamma(t))`` and the integral is
    ``int_0^1 int_0^1 alpha(d_s disk, d_t disk) dt ds``.

    Parameters
    ----------
    alpha : callable
        Maps points of shape (P, n) to components of shape (P, n, n, ...)
        with ``alpha[..., i, j, ...] = alpha(d_i, d_j)``.
    chart_radius : float
        Disk points with Euclidean norm at or beyond this radius raise
        :class:`ChartDomainError`.
    """
    x, w = d.x, d.w

    def integrate(panels):
        s, ws = gauss_legendre(0.0, 1.0, panels)
        t, wt = loop.nodes(panels)
        g = loop.position(t) - x
        gd = loop.velocity(t)
        fs = s[:, None, None] ** w
        pts = x + fs * g[None]
        if np.any(np.linalg.norm(pts, axis=-1) >= chart_radius):
            raise ChartDomainError("radial disk leaves the chart")
        ds = w * s[:, None, None] ** (w - 1) * g[None]
        dt = fs * gd[None]
        vals = alpha(pts.reshape(-1, loop.dim))
        vals = vals.reshape(pts.shape[:2] + vals.shape[1:])
        ein = np.einsum("stij...,sti,stj->st...", vals, ds, dt)
        total = np.tensordot(ws, np.tensordot(wt, ein, axes=(0, 1)), axes=(0, 0))
        absval = np.tensordot(ws, np.tensordot(wt, np.abs(ein), axes=(0, 1)), axes=(0, 0))
        return total, absval

    return _adaptive(integrate, rtol, max_panels, start=2)
