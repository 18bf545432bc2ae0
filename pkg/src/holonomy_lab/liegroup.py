"""Matrix Lie algebra and group kernels.

Algebra elements are plain ``(q, q)`` arrays (optionally with leading batch
axes); :class:`MatrixLieAlgebra` records which subalgebra they live in.
The Banach algebra norm used throughout is the operator 2-norm.

The transport solver integrates ``a'(t) = A(t) a(t)``, ``a(0) = I`` with a
Runge-Kutta-Munthe-Kaas scheme: on every step the logarithm ``Q`` of the
step propagator solves ``Q' = dexpinv(-Q, A)`` from ``Q = 0`` and the step
is mapped to the group through the exponential.  Results therefore stay on
the group up to the accuracy of ``expm``.
"""

import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import factorial

import numpy as np
from scipy.linalg import expm, logm
from scipy.optimize import minimize_scalar
from scipy.special import bernoulli

from .errors import InputError, LogDomainError, PreconditionError, SeriesRadiusWarning

__all__ = [
    "MatrixLieAlgebra",
    "AlgebraPath",
    "su2",
    "so3",
    "u1",
    "diagonal",
    "unipotent",
    "norm",
    "mat_exp",
    "mat_log",
    "dexpinv_apply",
    "dexpinv_constants",
    "solve_transport",
    "step_grid",
    "picard_bound",
    "picard_epsilon",
    "picard_defect",
    "group_residual",
    "random_algebra_path",
    "ALGEBRAS",
]


def norm(A):
    """Operator 2-norm over the last two axes."""
    A = np.asarray(A)
    if A.shape[-1] == 1:
        return np.abs(A[..., 0, 0])
    return np.linalg.norm(A, 2, axis=(-2, -1))


def bracket(A, B):
    return A @ B - B @ A


# ---------------------------------------------------------------------------
# algebras

@dataclass(frozen=True)
class MatrixLieAlgebra:
    """Real Lie subalgebra of gl(q, C) spanned by ``basis``.

    Parameters
    ----------
    name : str
    basis : ndarray, shape (d, q, q)
    group_tag : str
        Which group the exponential lands in; decides the manifold check
        (``"unitary"``, ``"orthogonal"``, ``"unipotent"`` or ``"general"``).
    """

    name: str
    basis: np.ndarray
    group_tag: str = "general"

    @property
    def q(self):
        return self.basis.shape[-1]

    @property
    def dim(self):
        return self.basis.shape[0]

    @cached_property
    def _real_basis(self):
        flat = self.basis.reshape(self.dim, -1)
        return np.concatenate([flat.real, flat.imag], axis=1).T

    def coords(self, A):
        """Real coordinates of ``A`` in the basis (least squares)."""
        A = np.asarray(A)
        flat = A.reshape(A.shape[:-2] + (-1,))
        rhs = np.concatenate([flat.real, flat.imag], axis=-1)
        sol, *_ = np.linalg.lstsq(self._real_basis, rhs.reshape(-1, rhs.shape[-1]).T, rcond=None)
        return sol.T.reshape(A.shape[:-2] + (self.dim,))

    def element(self, coords):
        coords = np.asarray(coords, dtype=float)
        return np.tensordot(coords, self.basis, axes=([-1], [0]))

    def membership_residual(self, A):
        return norm(self.element(self.coords(A)) - A)

    def ad_matrix(self, A):
        """Matrix of ``ad A`` in the basis coordinates."""
        images = bracket(np.asarray(A)[None], self.basis)
        return self.coords(images).T

    def closure_residual(self):
        """Largest deviation of a basis bracket from the span of the basis."""
        worst = 0.0
        for a in self.basis:
            for b in self.basis:
                worst = max(worst, float(self.membership_residual(bracket(a, b))))
        return worst

    @cached_property
    def is_abelian(self):
        return all(np.allclose(bracket(a, b), 0, atol=1e-14) for a in self.basis for b in self.basis)

    @cached_property
    def ad_norm(self):
        """Bound on ``sup ||[A1, A2]||`` over unit elements.

        Zero for abelian algebras, otherwise the universal Banach-algebra
        bound 2, which is attained for su(2) and so(3)
        (see :meth:`estimate_ad_norm`).
        """
        return 0.0 if self.is_abelian else 2.0

    def estimate_ad_norm(self, trials=64, seed=0):
        """Numerical lower estimate of the norm of ``ad`` by local maximization."""
        from scipy.optimize import minimize

        if self.is_abelian:
            return 0.0
        rng = np.random.default_rng(seed)
        d = self.dim

        def neg(x):
            X, Y = self.element(x[:d]), self.element(x[d:])
            return -norm(bracket(X, Y)) / (norm(X) * norm(Y))

        best = 0.0
        for _ in range(trials):
            res = minimize(neg, rng.standard_normal(2 * d), method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
            best = max(best, -res.fun)
        return min(best, 2.0)

    def random_element(self, rng, size=None):
        """Element with coordinates uniform in [-1, 1], rescaled to norm ``size``."""
        A = self.element(rng.uniform(-1.0, 1.0, self.dim))
        if size is not None:
            A = A * (size / norm(A))
        return A

    def group_residual(self, a):
        return group_residual(a, self.group_tag)


def su2():
    """su(2) with basis ``X_k = -i sigma_k / 2`` so that ``[X_1, X_2] = X_3``."""
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    s3 = np.array([[1, 0], [0, -1]], dtype=complex)
    return MatrixLieAlgebra("su2", np.array([-0.5j * s for s in (s1, s2, s3)]), "unitary")


def so3():
    """so(3) with the rotation generators ``J_k``; ``[J_1, J_2] = J_3``."""
    J = np.zeros((3, 3, 3))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        J[k, j, i] = 1.0
        J[k, i, j] = -1.0
    return MatrixLieAlgebra("so3", J, "orthogonal")


def u1():
    return MatrixLieAlgebra("u1", np.array([[[1j]]]), "unitary")


def diagonal(q=2):
    """Abelian algebra of imaginary diagonal matrices."""
    basis = np.zeros((q, q, q), dtype=complex)
    for k in range(q):
        basis[k, k, k] = 1j
    return MatrixLieAlgebra(f"diagonal{q}", basis, "unitary")


def unipotent(q=3):
    """Strictly upper-triangular matrices (exponentiating to unipotent groups)."""
    basis = []
    for i in range(q):
        for j in range(i + 1, q):
            E = np.zeros((q, q))
            E[i, j] = 1.0
            basis.append(E)
    return MatrixLieAlgebra(f"unipotent{q}", np.array(basis), "unipotent")


ALGEBRAS = {"su2": su2, "so3": so3, "u1": u1, "diagonal": diagonal, "unipotent": unipotent}


def group_residual(a, group_tag="unitary"):
    """Distance of ``a`` from the declared group manifold."""
    a = np.asarray(a)
    eye = np.eye(a.shape[-1])
    if group_tag in ("unitary", "orthogonal"):
        return norm(np.conj(np.swapaxes(a, -1, -2)) @ a - eye)
    if group_tag == "unipotent":
        lower = np.tril(a, -1)
        return np.max(np.abs(lower), axis=(-2, -1)) + np.max(
            np.abs(np.diagonal(a, axis1=-2, axis2=-1) - 1), axis=-1)
    return np.zeros(a.shape[:-2])


# ---------------------------------------------------------------------------
# exp / log

def _check_finite(A):
    A = np.asarray(A)
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    return A


def mat_exp(A):
    """Matrix exponential (scaling and squaring with a Pade core).

    Accepts stacked matrices of shape ``(..., q, q)``.
    """
    A = _check_finite(A)
    return expm(A)


def mat_log(a, tol_domain=1.0):
    """Principal logarithm of a group element near the identity.

    Raises
    ------
    LogDomainError
        If ``||a - I|| >= 1``; callers should shrink the loop.
    """
    a = _check_finite(a)
    if a.ndim > 2:
        return np.stack([mat_log(x, tol_domain) for x in a.reshape((-1,) + a.shape[-2:])]
                        ).reshape(a.shape)
    dist = float(norm(a - np.eye(a.shape[-1])))
    if dist >= tol_domain:
        raise LogDomainError(f"||a - I|| = {dist:.3g} is outside the principal log domain")
    if dist == 0.0:
        return np.zeros_like(a)
    if dist < 1e-4:
        # Mercator series; the X^7 remainder is below 1e-28
        X = a - np.eye(a.shape[-1])
        L, P = np.zeros_like(X), np.eye(a.shape[-1], dtype=X.dtype)
        for n in range(1, 7):
            P = P @ X
            L = L + ((-1) ** (n + 1) / n) * P
        return L
    L = logm(a)
    if np.isrealobj(a):
        L = np.real(L)
    # one Newton correction on exp(L) = a tightens the result near the identity
    E = expm(L)
    L = L + _dexp_solve(L, (a - E) @ np.linalg.inv(E))
    return L


def _dexp_solve(L, R, order=12):
    # correction X with dexp_L(X) ~ R, applied through the inverse series
    return dexpinv_apply(-L, R, order=order, check=False)


# ---------------------------------------------------------------------------
# dexp inverse

@lru_cache(maxsize=None)
def _g_coefficients(order):
    B = bernoulli(order)
    return tuple(((-1) ** n) * B[n] / factorial(n) for n in range(order + 1))


def _ad_spectral_radius(Q):
    ev = np.linalg.eigvals(Q)
    return float(np.max(np.abs(ev[..., :, None] - ev[..., None, :]))) if ev.size else 0.0


def dexpinv_apply(Q, A, order=8, check=True):
    """Evaluate ``g(ad Q) A`` with ``g(z) = z / (1 - exp(-z))``.

    The series ``g(z) = sum_n (-1)^n B_n z^n / n!`` is truncated after the
    ``ad Q``-power ``order``.  Inputs broadcast over leading axes.

    Warns with :class:`SeriesRadiusWarning` when the spectral radius of
    ``ad Q`` reaches ``pi``.
    """
    if order < 1:
        raise PreconditionError("order must be >= 1")
    Q = np.asarray(Q)
    A = np.asarray(A)
    if check and Q.size and _ad_spectral_radius(Q) >= np.pi:
        warnings.warn("||ad Q|| >= pi: dexpinv series near its radius of convergence",
                      SeriesRadiusWarning, stacklevel=2)
    coeffs = _g_coefficients(order)
    out = A.astype(np.result_type(Q, A), copy=True)
    term = A
    for n in range(1, order + 1):
        term = Q @ term - term @ Q
        if coeffs[n] != 0.0:
            out = out + coeffs[n] * term
    return out


def _g_abs(theta):
    z = np.pi * np.exp(1j * theta)
    e = np.exp(-z)
    return np.abs(z / (1 - e)), np.abs(((1 - e) - z * e) / (1 - e) ** 2)


@lru_cache(maxsize=None)
def dexpinv_constants(samples=4096):
    """Return ``(B1, B2)``: maxima of ``|g|`` and ``|g'|`` on ``|z| <= pi``.

    Both functions are analytic on the disk, so the maxima sit on the
    boundary circle; a sampled maximum is refined by bounded 1-d search.
    """
    theta = 2 * np.pi * np.arange(samples) / samples
    vals = _g_abs(theta)
    out = []
    for k in range(2):
        i = int(np.argmax(vals[k]))
        h = 2 * np.pi / samples
        res = minimize_scalar(lambda t: -_g_abs(t)[k], bounds=(theta[i] - h, theta[i] + h),
                              method="bounded", options={"xatol": 1e-12})
        out.append(max(float(vals[k][i]), float(-res.fun)))
    return tuple(out)


# ---------------------------------------------------------------------------
# paths and transport

@dataclass(frozen=True)
class AlgebraPath:
    """Continuous curve ``t -> A(t)`` in a matrix Lie algebra, ``t`` in [0, 1].

    Parameters
    ----------
    sample : callable
        Vectorized: maps an array of times of shape (T,) to (T, q, q).
    breakpoints : tuple of float
        Interior times where ``A`` may jump (kinks of the underlying loop).
    """

    sample: object
    breakpoints: tuple = field(default=())
    resolution: int = 4097

    def __call__(self, t):
        return self.sample(np.atleast_1d(np.asarray(t, dtype=float)))

    @cached_property
    def sup_norm(self):
        t = np.union1d(np.linspace(0.0, 1.0, self.resolution), _nudged(self.breakpoints))
        return float(np.max(norm(self.sample(t))))

    def rescaled(self, t1):
        """The path ``u -> t1 * A(t1 u)``; its transport at 1 equals a(t1)."""
        return AlgebraPath(lambda u: t1 * self.sample(t1 * np.asarray(u)),
                           tuple(b / t1 for b in self.breakpoints if 0 < b < t1),
                           self.resolution)


def _nudged(breakpoints, delta=1e-13):
    b = np.asarray(breakpoints, dtype=float)
    return np.concatenate([b - delta, b + delta]) if b.size else b


def step_grid(steps, breakpoints=()):
    """Step edges covering [0, 1] with every breakpoint on the grid."""
    edges = np.unique(np.concatenate([[0.0, 1.0], np.asarray(breakpoints, dtype=float)]))
    edges = edges[(edges >= 0.0) & (edges <= 1.0)]
    widths = np.diff(edges)
    counts = np.maximum(1, np.round(steps * widths).astype(int))
    pieces = [np.linspace(a, b, c + 1)[:-1] for a, b, c in zip(edges[:-1], edges[1:], counts)]
    return np.concatenate(pieces + [[1.0]])


def _ordered_product(E):
    # E[0] acts first: returns E[-1] @ ... @ E[0]
    while E.shape[0] > 1:
        if E.shape[0] % 2:
            E = np.concatenate([E, np.eye(E.shape[-1], dtype=E.dtype)[None]])
        E = E[1::2] @ E[0::2]
    return E[0]


def rkmk4_logs(A, grid, nudge=1e-13):
    """Per-step logarithms ``Q_i`` of the RKMK4 propagators on ``grid``."""
    t0 = grid[:-1]
    h = np.diff(grid)
    # evaluate just inside each step so one-sided values are used at kinks
    left = t0 + nudge * h
    mid = t0 + 0.5 * h
    right = grid[1:] - nudge * h
    values = A.sample(np.concatenate([left, mid, right]))
    n = len(t0)
    A0, Am, A1 = values[:n], values[n:2 * n], values[2 * n:]
    hh = h[:, None, None]
    k1 = A0
    k2 = dexpinv_apply(-0.5 * hh * k1, Am, check=False)
    k3 = dexpinv_apply(-0.5 * hh * k2, Am, check=False)
    k4 = dexpinv_apply(-hh * k3, A1, check=False)
    return hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def solve_transport(A, steps, breakpoints=None):
    """Propagator ``a(1)`` of ``a' = A(t) a``, ``a(0) = I``.

    Parameters
    ----------
    A : AlgebraPath
    steps : int
        Approximate number of steps; each breakpoint of ``A`` starts a new
        step so kinks never sit inside a step.

    Returns
    -------
    ndarray, shape (q, q)
    """
    if steps < 1:
        raise PreconditionError("steps must be >= 1")
    if not isinstance(A, AlgebraPath):
        A = AlgebraPath(A)
    bps = A.breakpoints if breakpoints is None else breakpoints
    grid = step_grid(int(steps), bps)
    Q = rkmk4_logs(A, grid)
    return _ordered_product(expm(Q))


# ---------------------------------------------------------------------------
# Picard bound

def _ad_norm(algebra, ad_norm):
    if ad_norm is not None:
        return float(ad_norm)
    if algebra is None:
        return 2.0
    return algebra.ad_norm


def picard_epsilon(algebra=None, ad_norm=None):
    """Admissible radius ``eps = 1 / (2 B)`` with ``B = max(B1 ||ad|| / pi, B2 ||ad||)``.

    Any ``eps <= 1 / B`` is allowed; ``eps = 1 / B`` itself makes the
    denominator ``1 - ||ad|| B2 eps`` vanish whenever ``B = B2 ||ad||``, so
    half of it is used, which keeps that denominator at least 1/2.
    """
    adn = _ad_norm(algebra, ad_norm)
    if adn == 0.0:
        return np.inf
    B1, B2 = dexpinv_constants()
    return 0.5 / max(B1 * adn / np.pi, B2 * adn)


def picard_bound(A, t=1.0, algebra=None, ad_norm=None):
    """Upper bound on ``||Q(t) - int_0^t A||`` for the transport logarithm ``Q``.

    ``A`` is read on ``[0, t]``.  The norm of ``ad`` comes from ``ad_norm``
    if given, else from ``algebra``, else the universal value 2.

    Raises
    ------
    PreconditionError
        If ``t ||A||_inf >= eps``.
    """
    if not isinstance(A, AlgebraPath):
        A = AlgebraPath(A)
    adn = _ad_norm(algebra, ad_norm)
    sup = A.rescaled(t).sup_norm / t if t != 1.0 else A.sup_norm
    if adn == 0.0:
        return 0.0
    eps = picard_epsilon(ad_norm=adn)
    if t * sup >= eps:
        raise PreconditionError(f"t*||A|| = {t * sup:.4g} >= eps = {eps:.4g}")
    _, B2 = dexpinv_constants()
    return adn * t ** 2 * B2 ** 2 * sup ** 2 / (1.0 - adn * B2 * eps)


def picard_defect(A, t=1.0, steps=2000, quad_nodes=64):
    """Measured ``||log a(t) - int_0^t A||`` using the transport solver."""
    if not isinstance(A, AlgebraPath):
        A = AlgebraPath(A)
    path = A.rescaled(t) if t != 1.0 else A
    a = solve_transport(path, steps)
    x, w = np.polynomial.legendre.leggauss(quad_nodes)
    edges = np.unique(np.concatenate([[0.0, 1.0], path.breakpoints]))
    integral = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes = 0.5 * (hi - lo) * (x + 1) + lo
        integral = integral + np.tensordot(0.5 * (hi - lo) * w, path.sample(nodes), axes=(0, 0))
    return float(norm(mat_log(a) - integral))


def random_algebra_path(algebra, seed, sup=1.0, modes=3, kink=True):
    """Seeded trigonometric path in ``algebra`` rescaled to ``||A||_inf = sup``.

    With ``kink`` the path is continued by a different random profile after a
    breakpoint at a random time, giving a piecewise-smooth path.
    """
    rng = np.random.default_rng(seed)

    def profile():
        C = [algebra.element(rng.uniform(-1.0, 1.0, algebra.dim)) for _ in range(2 * modes + 1)]
        phase = rng.uniform(0.0, 2 * np.pi, modes)
        return C, phase

    first, second = profile(), profile()
    cut = float(rng.uniform(0.25, 0.75)) if kink else 2.0

    def raw(t, prof):
        C, phase = prof
        out = np.broadcast_to(C[0], t.shape + C[0].shape).astype(complex)
        for k in range(1, modes + 1):
            arg = 2 * np.pi * k * t + phase[k - 1]
            out = out + np.cos(arg)[:, None, None] * C[2 * k - 1] + np.sin(arg)[:, None, None] * C[2 * k]
        return out

    def sample(t):
        t = np.asarray(t, dtype=float)
        return np.where((t < cut)[:, None, None], raw(t, first), raw(t, second))

    base = AlgebraPath(sample, (cut,) if kink else ())
    scale = sup / base.sup_norm
    return AlgebraPath(lambda t: scale * sample(np.asarray(t, dtype=float)), base.breakpoints)
