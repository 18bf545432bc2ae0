"""Connections in a fixed gauge on a coordinate patch.

Conventions (used everywhere in the package):

* transport along a curve solves ``a' a^{-1} = -omega(gamma')``;
* curvature ``Omega_ij = d_i omega_j - d_j omega_i + [omega_i, omega_j]``,
  which makes ``Hol = exp(-int_disk Omega)`` exact for abelian connections;
* covariant derivative of an Ad-valued field ``nabla_k f = d_k f + [omega_k, f]``;
* a gauge change by ``a(z)`` maps ``omega -> a^{-1} omega a + a^{-1} da``.

A connection is a function from coordinate jets (see :mod:`.jets`) to the
list of coefficient jets ``omega_k``.  Evaluating on order-0 jets gives
numerical values and higher orders give partial derivatives, so analytic
connections never need finite differences.
"""

import numpy as np

from .errors import CapabilityError, PreconditionError
from .jets import Jet, monomials, raise_order, variables

__all__ = [
    "Field",
    "MatrixPolynomial",
    "GaugeConnection",
    "CurvatureField",
    "curvature_jets",
    "curvature_at",
    "covariant_derivative",
    "covariant_derivative_along",
    "gauge_transform",
    "exponential_gauge",
    "zero_connection",
    "abelian_constant_curvature",
    "su2_example",
    "random_polynomial_connection",
    "random_gauge",
    "check_partials",
]


def _stack_values(jets, axis=-3):
    return np.stack([j.value for j in jets], axis=axis)


class Field:
    """Matrix-valued field written as a function of coordinate jets.

    Parameters
    ----------
    fn : callable
        ``fn(z)`` with ``z`` a list of coordinate jets returns a matrix jet.
    dim : int
        Number of coordinates.
    """

    def __init__(self, fn, dim):
        self.fn = fn
        self.dim = dim

    def on(self, z):
        return self.fn(z)

    def jet(self, center, order):
        return self.fn(variables(center, order))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return self.fn(variables(z, 0)).value

    def gradient(self, z):
        """Array ``(..., n, q, q)`` of first partials."""
        J = self.fn(variables(np.asarray(z, dtype=float), 1))
        return np.stack([J.deriv(i).value for i in range(self.dim)], axis=-3)


class MatrixPolynomial:
    """Polynomial ``sum_e C_e (z - x)^e`` with matrix coefficients.

    Parameters
    ----------
    terms : dict
        Exponent tuple -> (q, q) coefficient.
    center : array_like
        Expansion point ``x``.
    """

    def __init__(self, terms, center, q=None):
        self.center = np.asarray(center, dtype=float)
        self.nvars = len(self.center)
        terms = {tuple(int(v) for v in e): np.asarray(C) for e, C in terms.items()}
        self.terms = {e: C for e, C in terms.items() if np.any(C != 0)}
        if q is None:
            q = next(iter(terms.values())).shape[-1] if terms else 1
        self.q = q
        self.degree = max((sum(e) for e in self.terms), default=0)

    def on(self, z):
        if not self.terms:
            return Jet.constant(np.zeros((self.q, self.q)), z[0].nvars, z[0].order,
                                batch=z[0].batch_shape, vdim=2)
        h = [zi - c for zi, c in zip(z, self.center)]
        powers = [[None] * (self.degree + 1) for _ in h]
        order = z[0].order

        def power(i, p):
            if p == 0:
                return None
            if powers[i][p] is None:
                powers[i][p] = h[i] if p == 1 else power(i, p - 1) * h[i]
            return powers[i][p]

        exps = list(self.terms)
        monos = []
        for e in exps:
            m = None
            for i, p in enumerate(e):
                if p:
                    f = power(i, p)
                    m = f if m is None else m * f
            if m is None:
                m = Jet.constant(1.0, z[0].nvars, order, batch=z[0].batch_shape, vdim=0)
            monos.append(m.coeffs)
        stack = np.stack(monos)
        C = np.stack([self.terms[e] for e in exps])
        coeffs = np.einsum("e...,eab->...ab", stack, C)
        return Jet(coeffs, z[0].nvars, order, 2)

    def __call__(self, z):
        return self.on(variables(np.asarray(z, dtype=float), 0)).value

    def deriv(self, i):
        out = {}
        for e, C in self.terms.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                out[tuple(e2)] = out.get(tuple(e2), 0) + e[i] * C
        return MatrixPolynomial(out, self.center, self.q)


class GaugeConnection:
    """Coefficients ``omega_k(z)`` of a connection one-form in a gauge.

    Parameters
    ----------
    components : callable
        ``components(z)`` maps a list of ``dim`` coordinate jets to ``dim``
        matrix jets (the coefficients ``omega_k``).
    dim : int
    q : int
        Matrix size of the structure-group representation.
    basepoint : array_like, optional
    algebra : MatrixLieAlgebra, optional
    name : str
    """

    def __init__(self, components, dim, q, basepoint=None, algebra=None, name="connection"):
        self._components = components
        self.dim = int(dim)
        self.q = int(q)
        self.basepoint = None if basepoint is None else np.asarray(basepoint, dtype=float)
        self.algebra = algebra
        self.name = name

    # construction ---------------------------------------------------------
    @classmethod
    def from_polynomials(cls, polys, **kw):
        polys = list(polys)
        kw.setdefault("q", polys[0].q)
        kw.setdefault("basepoint", polys[0].center)
        return cls(lambda z: [p.on(z) for p in polys], len(polys), **kw)

    @classmethod
    def from_callables(cls, omega, d_omega=None, dim=None, q=None, fd_step=1e-5, **kw):
        """Connection from numerical callables.

        Parameters
        ----------
        omega : callable
            Points ``(..., n)`` -> coefficients ``(..., n, q, q)``.
        d_omega : callable, optional
            Points -> partials ``(..., i, k, q, q)`` holding ``d_i omega_k``.
            Central differences with step ``fd_step`` are used otherwise.

        Only first partials are available from such a connection; asking for
        higher orders raises :class:`CapabilityError`.
        """

        def partials(center):
            if d_omega is not None:
                return np.asarray(d_omega(center))
            cols = []
            for i in range(center.shape[-1]):
                e = np.zeros(center.shape[-1])
                e[i] = fd_step
                cols.append((np.asarray(omega(center + e)) - np.asarray(omega(center - e)))
                            / (2 * fd_step))
            return np.stack(cols, axis=-4)

        def components(z):
            order = z[0].order
            if order > 1:
                raise CapabilityError(
                    f"connection supplies partials up to order 1; order {order} requested")
            center = np.stack([zi.value for zi in z], axis=-1)
            W = np.asarray(omega(center))
            n = center.shape[-1]
            out = []
            D = partials(center) if order == 1 else None
            for k in range(n):
                if order == 0:
                    coeffs = W[..., k, :, :][None]
                else:
                    coeffs = np.concatenate([W[..., k, :, :][None]]
                                            + [D[..., i, k, :, :][None] for i in range(n)])
                out.append(Jet(coeffs, n, order, 2))
            return out

        if dim is None or q is None:
            raise PreconditionError("dim and q are required")
        return cls(components, dim, q, **kw)

    # evaluation -----------------------------------------------------------
    def components(self, z):
        return self._components(z)

    def jets(self, center, order):
        return self._components(variables(center, order))

    def omega(self, z):
        """Coefficients at points ``(..., n)`` as ``(..., n, q, q)``."""
        return _stack_values(self.jets(np.asarray(z, dtype=float), 0))

    def d_omega(self, z):
        """First partials ``(..., i, k, q, q)`` with entry ``d_i omega_k``."""
        W = self.jets(np.asarray(z, dtype=float), 1)
        return np.stack([np.stack([W[k].deriv(i).value for k in range(self.dim)], axis=-3)
                         for i in range(self.dim)], axis=-4)

    def component_field(self, k):
        return Field(lambda z: self._components(z)[k], self.dim)

    def curvature(self):
        return CurvatureField(self)

    def __repr__(self):
        return f"GaugeConnection(name={self.name!r}, dim={self.dim}, q={self.q})"


# ---------------------------------------------------------------------------
# curvature

def curvature_jets(W):
    """Curvature jets ``Omega[i][j]`` (order one less) from connection jets ``W``."""
    n = len(W)
    order = W[0].order - 1
    if order < 0:
        raise CapabilityError("curvature needs first partials of the connection")
    low = [w.truncate(order) for w in W]
    zero = low[0] * 0.0
    Om = [[zero] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            O = W[j].deriv(i) - W[i].deriv(j) + low[i].bracket(low[j])
            Om[i][j] = O
            Om[j][i] = -O
    return Om


class CurvatureField:
    """Curvature ``Omega_ij`` of a :class:`GaugeConnection`."""

    def __init__(self, source):
        self.source = source
        self.dim = source.dim

    def components(self, z):
        """Curvature jets at coordinate jets ``z`` (same order as ``z``)."""
        return curvature_jets(self.source.components(raise_order(z)))

    def component(self, i, j):
        return Field(lambda z: self.components(z)[i][j], self.dim)

    def __call__(self, z):
        """Values ``(..., n, n, q, q)`` at points ``(..., n)``."""
        Om = self.components(variables(np.asarray(z, dtype=float), 0))
        return np.stack([np.stack([o.value for o in row], axis=-3) for row in Om], axis=-4)

    def bianchi_residual(self, z):
        """Largest cyclic sum of ``nabla_k Omega_ij`` over the points ``z``."""
        z = np.asarray(z, dtype=float)
        zz = variables(z, 2)
        W = self.source.components(zz)
        Om = curvature_jets(W)
        n = self.dim
        worst = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    total = 0
                    for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
                        total = total + Om[a][b].deriv(c).value + _commute(
                            W[c].value, Om[a][b].value)
                    worst = max(worst, float(np.max(np.abs(total))))
        return worst


def _commute(A, B):
    return A @ B - B @ A


def curvature_at(c, z):
    """Curvature components ``(..., n, n, q, q)`` of ``c`` at points ``z``."""
    return CurvatureField(c)(z)


# ---------------------------------------------------------------------------
# covariant derivatives

def covariant_derivative(c, f, k):
    """The field ``d_k f + [omega_k, f]`` for an Ad-valued field ``f``."""

    def fn(z):
        zp = raise_order(z)
        F = f.on(zp)
        Wk = c.components(zp)[k]
        order = z[0].order
        return F.deriv(k) + Wk.truncate(order).bracket(F.truncate(order))

    return Field(fn, c.dim)


def covariant_derivative_along(c, f, X):
    """Covariant derivative of ``f`` along a vector field.

    ``X(z)`` returns the coordinate coefficient jets ``X^i``; the result is
    ``sum_i X^i (d_i f + [omega_i, f])``.
    """

    def fn(z):
        zp = raise_order(z)
        order = z[0].order
        F = f.on(zp)
        W = c.components(zp)
        Xc = X(z)
        Fl = F.truncate(order)
        total = None
        for i in range(c.dim):
            term = Xc[i] * (F.deriv(i) + W[i].truncate(order).bracket(Fl))
            total = term if total is None else total + term
        return total

    return Field(fn, c.dim)


# ---------------------------------------------------------------------------
# gauge transformations

def _jet_inverse(A):
    # A = A0 (I + A0^{-1} U) with nilpotent U: Neumann series
    A0 = A.value
    inv0 = np.linalg.inv(A0)
    U = A - A0
    N = inv0 @ U
    result = Jet.constant(inv0, A.nvars, A.order, batch=A.batch_shape, vdim=2)
    term = result
    for _ in range(A.order):
        term = -(N @ term)
        result = result + term
    return result


def exponential_gauge(P):
    """Gauge map ``a = exp(P)`` from an algebra-valued field or polynomial ``P``.

    Returns a callable mapping coordinate jets to the pair ``(a, a^{-1})``.
    """

    def fn(z):
        X = P.on(z)
        return X.expm(), (-X).expm()

    return fn


def gauge_transform(c, a, tol=1e-12):
    """Connection after the change of gauge by ``a``.

    Parameters
    ----------
    c : GaugeConnection
    a : callable
        Maps coordinate jets to a group-valued matrix jet, or to a pair
        ``(a, a_inverse)`` of jets (see :func:`exponential_gauge`).

    Raises
    ------
    PreconditionError
        If ``a`` is not the identity at the basepoint of ``c``.
    """

    def pair(z):
        out = a(z)
        if isinstance(out, tuple):
            return out
        return out, _jet_inverse(out)

    if c.basepoint is not None:
        A0, _ = pair(variables(c.basepoint, 0))
        if np.max(np.abs(A0.value - np.eye(c.q))) > tol:
            raise PreconditionError("gauge map is not the identity at the basepoint")

    def components(z):
        zp = raise_order(z)
        order = z[0].order
        W = c.components(z)
        g, ginv = pair(zp)
        gl, ginvl = g.truncate(order), ginv.truncate(order)
        return [ginvl @ W[k] @ gl + ginvl @ g.deriv(k) for k in range(c.dim)]

    return GaugeConnection(components, c.dim, c.q, c.basepoint, c.algebra, name=c.name + "^a")


# ---------------------------------------------------------------------------
# presets

def zero_connection(dim=2, q=2, basepoint=None):
    x = np.zeros(dim) if basepoint is None else basepoint
    return GaugeConnection.from_polynomials(
        [MatrixPolynomial({}, x, q) for _ in range(dim)], name="flat")


def abelian_constant_curvature(A0, basepoint=None):
    """``omega = (-z_2 dz_1 + z_1 dz_2) A0 / 2`` on R^2; curvature ``A0 dz_1 ^ dz_2``."""
    A0 = np.asarray(A0)
    x = np.zeros(2)
    p1 = MatrixPolynomial({(0, 1): -0.5 * A0}, x)
    p2 = MatrixPolynomial({(1, 0): 0.5 * A0}, x)
    return GaugeConnection.from_polynomials([p1, p2], basepoint=basepoint, name="abelian")


def su2_example():
    """``omega_1 = X_1``, ``omega_2 = z_1 X_2`` on R^2."""
    from .liegroup import su2

    g = su2()
    X = g.basis
    x = np.zeros(2)
    p1 = MatrixPolynomial({(0, 0): X[0]}, x)
    p2 = MatrixPolynomial({(1, 0): X[1]}, x)
    return GaugeConnection.from_polynomials([p1, p2], algebra=g, name="su2-example")


def _random_terms(rng, algebra, dim, degree, amplitude, min_degree=0):
    terms = {}
    for e in monomials(dim, degree):
        if sum(e) < min_degree:
            continue
        terms[e] = amplitude * algebra.element(rng.uniform(-1.0, 1.0, algebra.dim))
    return terms


def random_polynomial_connection(dim, algebra, seed, degree=3, amplitude=1.0,
                                 basepoint=None, flat_at_basepoint=False):
    """Seeded polynomial connection with coefficients uniform in [-1, 1].

    With ``flat_at_basepoint`` the first-order terms are adjusted so that
    the curvature vanishes at the basepoint while its derivative does not.
    """
    rng = np.random.default_rng(seed)
    x = np.zeros(dim) if basepoint is None else np.asarray(basepoint, dtype=float)
    comps = [_random_terms(rng, algebra, dim, degree, amplitude) for _ in range(dim)]
    if flat_at_basepoint:
        zero = (0,) * dim
        W0 = [comps[k][zero] for k in range(dim)]
        for i in range(dim):
            for j in range(dim):
                e = [0] * dim
                e[i] = 1
                e = tuple(e)
                ej = [0] * dim
                ej[j] = 1
                ej = tuple(ej)
                if i <= j:
                    sym = 0.5 * (comps[j][e] + comps[i][ej])
                    for a, b, ee in ((i, j, e), (j, i, ej)):
                        # d_a omega_b = sym - [omega_a, omega_b] / 2
                        comps[b][ee] = sym - 0.5 * _commute(W0[a], W0[b])
    polys = [MatrixPolynomial(t, x, algebra.q) for t in comps]
    return GaugeConnection.from_polynomials(polys, algebra=algebra,
                                            name=f"random-poly(seed={seed})")


def random_gauge(dim, algebra, seed, degree=2, amplitude=0.5, basepoint=None):
    """Gauge map ``exp(P)`` with a seeded polynomial ``P`` vanishing at the basepoint."""
    rng = np.random.default_rng(seed)
    x = np.zeros(dim) if basepoint is None else np.asarray(basepoint, dtype=float)
    P = MatrixPolynomial(_random_terms(rng, algebra, dim, degree, amplitude, 1), x, algebra.q)
    return exponential_gauge(P)


def check_partials(c, points, h=1e-5):
    """Largest deviation between ``c.d_omega`` and central differences."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    D = c.d_omega(points)
    worst = 0.0
    for i in range(c.dim):
        e = np.zeros(c.dim)
        e[i] = h
        fd = (c.omega(points + e) - c.omega(points - e)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(D[:, i] - fd))))
    return worst
