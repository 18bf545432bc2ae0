"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` holds the Taylor coefficients of a function of ``n`` real
variables around a centre, truncated at total degree ``order``.  Values
may be scalars or matrices, and every coefficient may carry leading batch
axes so that many centres are processed at once.

Jets are how the package obtains derivatives: a connection, frame or
field is written once as a function of jet variables, and evaluating it
on

* order-0 jets gives plain (batched) numerical values,
* order-1 jets gives first partials,
* order-N jets at one point gives the Taylor data needed by expansions.

Coefficients are stored in a graded monomial order, so the coefficients
of a lower-order truncation are a prefix of the higher-order ones.
"""

from functools import lru_cache
from math import factorial

import numpy as np

from .errors import CapabilityError

__all__ = ["Jet", "monomials", "variables", "raise_order", "CapabilityError"]


def _compositions(total, parts):
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out


@lru_cache(maxsize=None)
def monomials(nvars, order):
    """Exponent tuples of total degree <= order in graded order."""
    out = []
    for deg in range(order + 1):
        out.extend(_compositions(deg, nvars))
    return tuple(out)


@lru_cache(maxsize=None)
def _index(nvars, order):
    return {e: k for k, e in enumerate(monomials(nvars, order))}


@lru_cache(maxsize=None)
def _product_table(nvars, order):
    # pairs (I, J) with deg(I) + deg(J) <= order, sorted by target K
    monos = monomials(nvars, order)
    index = _index(nvars, order)
    triples = []
    for a, ea in enumerate(monos):
        for b, eb in enumerate(monos):
            if sum(ea) + sum(eb) > order:
                continue
            triples.append((index[tuple(x + y for x, y in zip(ea, eb))], a, b))
    triples.sort()
    K = np.array([t[0] for t in triples])
    I = np.array([t[1] for t in triples])
    J = np.array([t[2] for t in triples])
    starts = np.flatnonzero(np.r_[True, K[1:] != K[:-1]])
    return I, J, starts


@lru_cache(maxsize=None)
def _deriv_table(nvars, order, i):
    monos = monomials(nvars, order)
    lower = _index(nvars, order - 1)
    src, dst, fac = [], [], []
    for a, e in enumerate(monos):
        if e[i] == 0:
            continue
        e2 = list(e)
        e2[i] -= 1
        src.append(a)
        dst.append(lower[tuple(e2)])
        fac.append(float(e[i]))
    return np.array(src), np.array(dst), np.array(fac)


def _expand(x, ndim):
    return x.reshape(x.shape + (1,) * ndim)


class Jet:
    """Truncated Taylor expansion with optional batch and value axes.

    Parameters
    ----------
    coeffs : ndarray
        Shape ``(M, *batch, *value_shape)`` where ``M`` is the number of
        monomials of degree ``<= order`` in ``nvars`` variables.
    nvars : int
    order : int
    vdim : int
        Number of trailing value axes (0 for scalars, 2 for matrices).
    """

    __array_priority__ = 1000

    def __init__(self, coeffs, nvars, order, vdim=0):
        self.coeffs = coeffs
        self.nvars = nvars
        self.order = order
        self.vdim = vdim

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, nvars, order, batch=(), vdim=None):
        value = np.asarray(value)
        if vdim is None:
            vdim = value.ndim
        M = len(monomials(nvars, order))
        vshape = value.shape[value.ndim - vdim:] if vdim else ()
        shape = tuple(batch) + vshape
        dtype = np.result_type(value.dtype, float)
        coeffs = np.zeros((M,) + np.broadcast_shapes(shape, value.shape), dtype=dtype)
        coeffs[0] = value
        return cls(coeffs, nvars, order, vdim)

    def like(self, coeffs, order=None, vdim=None):
        return Jet(coeffs, self.nvars, self.order if order is None else order,
                   self.vdim if vdim is None else vdim)

    # basic properties -------------------------------------------------
    @property
    def value(self):
        """Value at the centre (the degree-0 coefficient)."""
        return self.coeffs[0]

    @property
    def batch_shape(self):
        return self.coeffs.shape[1:self.coeffs.ndim - self.vdim]

    @property
    def value_shape(self):
        return self.coeffs.shape[self.coeffs.ndim - self.vdim:]

    def truncate(self, order):
        if order > self.order:
            raise CapabilityError(
                f"jet of order {self.order} cannot supply order {order}")
        M = len(monomials(self.nvars, order))
        return self.like(self.coeffs[:M], order=order)

    def coefficient(self, exponent):
        """Taylor coefficient of ``(z - centre)**exponent``."""
        return self.coeffs[_index(self.nvars, self.order)[tuple(exponent)]]

    def partial(self, exponent):
        """Partial derivative ``d^exponent f`` at the centre."""
        scale = 1.0
        for e in exponent:
            scale *= factorial(e)
        return self.coefficient(exponent) * scale

    def deriv(self, i):
        """Jet of the partial derivative along variable ``i`` (order drops by one)."""
        if self.order == 0:
            raise CapabilityError("derivative of an order-0 jet")
        src, dst, fac = _deriv_table(self.nvars, self.order, i)
        M = len(monomials(self.nvars, self.order - 1))
        out = np.zeros((M,) + self.coeffs.shape[1:], dtype=self.coeffs.dtype)
        if len(src):
            out[dst] = self.coeffs[src] * _expand(fac, self.coeffs.ndim - 1)
        return self.like(out, order=self.order - 1)

    def evaluate(self, h):
        """Evaluate the truncated polynomial at offsets ``h`` of shape (..., n)."""
        h = np.asarray(h, dtype=float)
        total = 0
        for k, e in enumerate(monomials(self.nvars, self.order)):
            mono = np.prod(h ** np.array(e), axis=-1)
            total = total + _expand(mono, self.vdim) * self.coeffs[k]
        return total

    # arithmetic -------------------------------------------------------
    def _align(self, other):
        order = min(self.order, other.order)
        M = len(monomials(self.nvars, order))
        return self.coeffs[:M], other.coeffs[:M], order

    def __neg__(self):
        return self.like(-self.coeffs)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b, order = self._align(other)
            if self.vdim != other.vdim:
                raise ValueError("cannot add jets with different value ranks")
            return self.like(a + b, order=order)
        other = np.asarray(other)
        coeffs = np.array(self.coeffs, dtype=np.result_type(self.coeffs, other), copy=True)
        coeffs[0] = coeffs[0] + other
        return self.like(coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return _product(self, other, np.multiply)
        other = np.asarray(other)
        if other.ndim:
            raise TypeError("use Jet.outer or Jet.scale for array factors")
        return self.like(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self.like(self.coeffs / other)

    def __matmul__(self, other):
        if isinstance(other, Jet):
            return _product(self, other, np.matmul)
        return self.like(self.coeffs @ np.asarray(other))

    def __rmatmul__(self, other):
        return self.like(np.asarray(other) @ self.coeffs)

    def outer(self, value):
        """Scalar jet times a constant array, giving an array-valued jet."""
        value = np.asarray(value)
        if self.vdim:
            raise ValueError("outer needs a scalar jet")
        return Jet(_expand(self.coeffs, value.ndim) * value, self.nvars, self.order, value.ndim)

    def scale(self, factor):
        """Multiply by a numeric array broadcasting over the batch axes."""
        factor = np.asarray(factor)
        return self.like(self.coeffs * _expand(factor, self.vdim))

    def bracket(self, other):
        """Matrix commutator ``self @ other - other @ self``."""
        if isinstance(other, Jet):
            return _product(self, other, _commutator)
        other = np.asarray(other)
        return self.like(self.coeffs @ other - other @ self.coeffs)

    def conj_transpose(self):
        return self.like(np.conj(np.swapaxes(self.coeffs, -1, -2)))

    # nonlinear functions ------------------------------------------------
    def _series(self, derivs):
        """Compose with a univariate function given its derivatives at the value."""
        c0 = self.coeffs[0]
        u = self.like(np.concatenate([np.zeros_like(c0)[None], self.coeffs[1:]]))
        coeffs = np.zeros(self.coeffs.shape, dtype=np.result_type(self.coeffs, derivs[0]))
        coeffs[0] = derivs[0]
        out = self.like(coeffs)
        power = None
        for k in range(1, self.order + 1):
            power = u if power is None else power * u
            out = out + power.scale(derivs[k] / factorial(k))
        return out

    def _derivative_list(self, fn):
        return [fn(k) for k in range(self.order + 1)]

    def reciprocal(self):
        if self.vdim:
            raise ValueError("reciprocal of a matrix jet")
        c = self.coeffs[0]
        return self._series(self._derivative_list(
            lambda k: (-1) ** k * factorial(k) * c ** (-(k + 1))))

    def sqrt(self):
        if self.vdim:
            raise ValueError("sqrt of a matrix jet")
        c = self.coeffs[0]

        def d(k):
            coef = 1.0
            for r in range(k):
                coef *= 0.5 - r
            return coef * c ** (0.5 - k)
        return self._series(self._derivative_list(d))

    def sin(self):
        c = self.coeffs[0]
        return self._series(self._derivative_list(
            lambda k: [np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)][k % 4](c)))

    def cos(self):
        c = self.coeffs[0]
        return self._series(self._derivative_list(
            lambda k: [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin][k % 4](c)))

    def expm(self, terms=18):
        """Matrix exponential by scaling and squaring on the jet."""
        if self.vdim != 2:
            raise ValueError("expm needs a matrix jet")
        if self.order == 0:
            from scipy.linalg import expm
            return self.like(expm(self.coeffs))
        norm = float(np.max(np.abs(self.coeffs))) * self.coeffs.shape[-1] if self.coeffs.size else 0.0
        squarings = max(0, int(np.ceil(np.log2(norm / 0.25)))) if norm > 0.25 else 0
        y = self * (0.5 ** squarings)
        q = self.coeffs.shape[-1]
        eye = np.eye(q, dtype=self.coeffs.dtype)
        result = Jet.constant(eye, self.nvars, self.order, batch=self.batch_shape, vdim=2)
        term = result
        for k in range(1, terms + 1):
            term = (term @ y) * (1.0 / k)
            result = result + term
        for _ in range(squarings):
            result = result @ result
        return result

    def __repr__(self):
        return (f"Jet(nvars={self.nvars}, order={self.order}, batch={self.batch_shape}, "
                f"value_shape={self.value_shape})")


def _commutator(a, b):
    return a @ b - b @ a


def _product(x, y, op):
    a, b, order = x._align(y)
    if x.vdim != y.vdim:
        # scalar times array: lift the scalar over the value axes
        if x.vdim == 0:
            a = _expand(a, y.vdim)
        elif y.vdim == 0:
            b = _expand(b, x.vdim)
        else:
            raise ValueError("incompatible value ranks")
        if op is not np.multiply:
            raise ValueError("matrix product needs two matrix jets")
    vdim = max(x.vdim, y.vdim)
    if order == 0:
        return Jet(op(a, b), x.nvars, 0, vdim)
    I, J, starts = _product_table(x.nvars, order)
    prod = op(a[I], b[J])
    out = np.add.reduceat(prod, starts, axis=0)
    return Jet(out, x.nvars, order, vdim)


def variables(center, order):
    """Coordinate jets ``z_i`` expanded around ``center`` (shape ``(..., n)``)."""
    center = np.asarray(center, dtype=float)
    n = center.shape[-1]
    batch = center.shape[:-1]
    index = _index(n, order)
    out = []
    for i in range(n):
        coeffs = np.zeros((len(index),) + batch)
        coeffs[0] = center[..., i]
        if order >= 1:
            e = [0] * n
            e[i] = 1
            coeffs[index[tuple(e)]] = 1.0
        out.append(Jet(coeffs, n, order, 0))
    return out


def raise_order(z, extra=1):
    """Fresh coordinate jets at the same centres with order increased by ``extra``."""
    center = np.stack([zi.value for zi in z], axis=-1)
    return variables(center, z[0].order + extra)

