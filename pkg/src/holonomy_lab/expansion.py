"""Approximation functionals for holonomy of small loops.

A functional is a finite sum ``sum factor * C * int_gamma (z - x)_mu dz_j``
with rational ``factor``, Lie-algebra coefficient ``C`` and moment key
``(mu, j)``; the holonomy of a loop ``gamma`` based at ``x`` is then
approximated by ``exp(-F(gamma))``.

Taylor coefficients of Ad-valued fields use iterated covariant derivatives
``nabla_mu = nabla_{X_mu1} ... nabla_{X_mur}`` (``mu1`` outermost) along a
frame that is either the coordinate frame or the left-invariant frame of a
tangent Carnot group.  The default ``"ray"`` rule weights ``nabla_mu`` by

    prod_s w_{mu_s} / prod_r (w_{mu_1} + ... + w_{mu_r}),

which is what integrating ``nabla_S`` along the dilation rays produces; it
reduces to ``1 / j(mu)!`` when all weights agree.  The ``"symmetric"`` rule
always uses ``1 / j(mu)!``.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CapabilityError, PreconditionError
from .gauge import CurvatureField, GaugeConnection, curvature_jets
from .jets import Jet, monomials, raise_order, variables
from .loops import DilationStructure, disk_monomial, moment_table

__all__ = [
    "MultiIndex",
    "ExpansionTerm",
    "ExpansionFunctional",
    "multi_indices",
    "taylor_coefficient",
    "homogeneous_component",
    "weighted_taylor",
    "covariant_taylor",
    "two_form_functional",
    "taylor_functional",
    "euclidean_F3",
    "iota_chi",
    "selector_modify",
    "selector_residual",
    "model_F5",
    "heisenberg_q_functional",
]


# ---------------------------------------------------------------------------
# multi-indices

@dataclass(frozen=True)
class MultiIndex:
    """Sequence of frame indices (0-based), possibly empty."""

    entries: tuple = ()

    @property
    def j(self):
        return len(self.entries)

    def w(self, weights):
        return sum(weights[i] for i in self.entries)

    @property
    def size(self):
        """``|mu|`` with 1-based entries, as printed in index notation."""
        return sum(i + 1 for i in self.entries)

    def exponent(self, n):
        e = [0] * n
        for i in self.entries:
            e[i] += 1
        return tuple(e)


def multi_indices(weights, max_weight):
    """All index sequences with ``w(mu) <= max_weight``, shortest first."""
    weights = tuple(weights)
    n = len(weights)
    out = [()]
    frontier = [()]
    while frontier:
        nxt = []
        for mu in frontier:
            for a in range(n):
                nu = mu + (a,)
                if sum(weights[i] for i in nu) <= max_weight:
                    nxt.append(nu)
        out.extend(nxt)
        frontier = nxt
    return out


def taylor_coefficient(mu, weights, rule="ray"):
    """Rational weight of ``z_mu nabla_mu`` in a weighted Taylor polynomial."""
    if rule == "symmetric":
        return Fraction(1, math.factorial(len(mu)))
    if rule != "ray":
        raise PreconditionError(f"unknown Taylor rule {rule!r}")
    num, den, partial = 1, 1, 0
    for a in mu:
        num *= weights[a]
        partial += weights[a]
        den *= partial
    return Fraction(num, den)


# ---------------------------------------------------------------------------
# functionals

@dataclass(frozen=True)
class ExpansionTerm:
    """``factor * coefficient * int_gamma (z - x)_mu dz_j``."""

    coefficient: np.ndarray
    mu: tuple
    j: int
    factor: Fraction = Fraction(1)

    @property
    def key(self):
        return (self.mu, self.j)

    @property
    def matrix(self):
        return float(self.factor) * self.coefficient


def _mu_weight(mu, weights):
    return sum(weights[i] for i in mu)


@dataclass
class ExpansionFunctional:
    """Linear combination of line moments with matrix coefficients.

    Attributes
    ----------
    terms : list of ExpansionTerm
    order : int
    center : ndarray
        Base point ``x`` of the moments.
    weights : tuple
    kind : str
        One of ``euclidean-F3``, ``taylor-Fk``, ``heisenberg-F5``, ``hopf-F5``.
    """

    terms: list
    order: int
    center: np.ndarray
    weights: tuple
    kind: str = "taylor-Fk"
    q: int = field(default=None)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.weights = tuple(self.weights)
        if self.q is None and self.terms:
            self.q = self.terms[0].coefficient.shape[-1]

    def keys(self):
        return sorted({t.key for t in self.terms})

    def canonical(self, tol=0.0):
        """Coefficient matrix per moment key, with rational factors folded in."""
        out = {}
        for t in self.terms:
            out[t.key] = out.get(t.key, 0) + t.matrix
        return {k: v for k, v in sorted(out.items()) if np.max(np.abs(v)) > tol}

    def max_term_weight(self):
        """Largest ``w(mu) + w_j`` over the terms (the weight of the line form)."""
        if not self.terms:
            return 0
        return max(_mu_weight(t.mu, self.weights) + self.weights[t.j] for t in self.terms)

    def evaluate(self, loop, moments=None, rtol=1e-12):
        """``F(gamma)`` as a matrix (zero matrix or 0.0 for the empty functional)."""
        canon = self.canonical()
        if not canon:
            return 0.0 if self.q is None else np.zeros((self.q, self.q), dtype=complex)
        if moments is None:
            moments = moment_table(loop, self.center, canon.keys(), rtol=rtol)
        total = 0
        for k, C in canon.items():
            total = total + moments[k] * C
        return total

    def __add__(self, other):
        return ExpansionFunctional(self.terms + other.terms, max(self.order, other.order),
                                   self.center, self.weights, self.kind, self.q or other.q)

    def to_dict(self):
        terms = []
        for t in self.terms:
            C = np.asarray(t.coefficient, dtype=complex)
            terms.append({"mu": list(t.mu), "j": t.j,
                          "factor": [t.factor.numerator, t.factor.denominator],
                          "coefficient": {"re": C.real.tolist(), "im": C.imag.tolist()}})
        return {"kind": self.kind, "order": self.order, "center": self.center.tolist(),
                "weights": list(self.weights), "q": self.q, "terms": terms}

    @classmethod
    def from_dict(cls, data):
        terms = [ExpansionTerm(np.array(t["coefficient"]["re"]) + 1j * np.array(t["coefficient"]["im"]),
                               tuple(t["mu"]), int(t["j"]), Fraction(*t["factor"]))
                 for t in data["terms"]]
        return cls(terms, data["order"], np.array(data["center"]), tuple(data["weights"]),
                   data["kind"], data.get("q"))


# ---------------------------------------------------------------------------
# homogeneous components of ordinary functions

def _max_degree(d, m):
    return int(m // min(d.weights))


def weighted_taylor(f, d, k):
    """Homogeneous components of ``f`` at ``d.center`` up to weight ``k``.

    Parameters
    ----------
    f : callable
        Function of coordinate jets returning a jet (scalar or matrix valued).

    Returns
    -------
    dict
        ``{m: {exponent: coefficient}}`` for ``m = 0..k``.
    """
    order = _max_degree(d, k)
    J = f(variables(d.x, order))
    out = {m: {} for m in range(k + 1)}
    for idx, e in enumerate(monomials(d.dim, order)):
        m = d.weight(e)
        if m <= k:
            out[m][e] = J.coeffs[idx]
    return out


class HomogeneousPolynomial:
    """Polynomial ``sum c_e (z - x)^e`` evaluated at points (..., n)."""

    def __init__(self, coefficients, center):
        self.coefficients = dict(coefficients)
        self.center = np.asarray(center, dtype=float)

    def __call__(self, z):
        h = np.asarray(z, dtype=float) - self.center
        if not self.coefficients:
            return np.zeros(h.shape[:-1])
        total = 0
        for e, c in self.coefficients.items():
            mono = np.prod(h ** np.array(e), axis=-1)
            c = np.asarray(c)
            total = total + mono.reshape(mono.shape + (1,) * c.ndim) * c
        return np.asarray(total)


def homogeneous_component(f, d, m, form=()):
    """Weight-``m`` component of ``f`` at the dilation centre.

    Parameters
    ----------
    f : callable
        Jet function (see :func:`weighted_taylor`).
    d : DilationStructure
    m : int
    form : tuple of int, optional
        Coordinate indices of a basis form ``dz_i ^ ...`` multiplying ``f``;
        their weights count towards ``m``.
    """
    if m < 0:
        raise PreconditionError("m must be non-negative")
    shift = sum(d.weights[i] for i in form)
    if m < shift:
        return HomogeneousPolynomial({}, d.x)
    return HomogeneousPolynomial(weighted_taylor(f, d, m - shift)[m - shift], d.x)


# ---------------------------------------------------------------------------
# covariant Taylor expansion of Ad-valued fields

def _frame_fields(frame, n):
    if frame is None:
        def ident(z):
            one = Jet.constant(1.0, z[0].nvars, z[0].order, batch=z[0].batch_shape, vdim=0)
            zero = one * 0.0
            return [[one if i == a else zero for i in range(n)] for a in range(n)]
        return ident
    return frame


def _covariant_table(W, F, X, weights, budget):
    """Values ``nabla_mu F`` at the centre for ``w(mu) <= budget``.

    ``W`` are connection jets, ``F`` a list of Ad-valued jets and ``X`` frame
    jets, all at order ``>= budget // min(weights)``.
    """
    table = {(): F}
    out = {(): [f.value for f in F]}
    n = len(W)
    for mu in multi_indices(weights, budget)[1:]:
        a, inner = mu[0], mu[1:]
        G = table[inner]
        order = G[0].order - 1
        if order < 0:
            raise CapabilityError(f"derivative of order {len(mu)} exceeds the available jets")
        Wl = [w.truncate(order) for w in W]
        Xa = [x.truncate(order) for x in X[a]]
        res = []
        for g in G:
            gl = g.truncate(order)
            acc = None
            for i in range(n):
                term = Xa[i] * (g.deriv(i) + Wl[i].bracket(gl))
                acc = term if acc is None else acc + term
            res.append(acc)
        table[mu] = res
        out[mu] = [r.value for r in res]
    return out


def covariant_taylor(c, F, d, k, frame=None, rule="ray", omega_jets=None):
    """Weighted Taylor polynomials of Ad-valued fields at ``d.center``.

    Parameters
    ----------
    c : GaugeConnection
    F : callable
        ``F(z)`` returns a list of Ad-valued matrix jets.
    d : DilationStructure
    k : int
        Weight truncation.
    frame : callable, optional
        Frame jets ``X[a][i]`` (a frame with ``S = sum w_a z_a X_a``); the
        coordinate frame when omitted.
    rule : {"ray", "symmetric"}

    Returns
    -------
    list of dict
        One ``{exponent: matrix}`` per field.
    """
    n = d.dim
    order = _max_degree(d, k)
    z = variables(d.x, order)
    W = c.components(z) if omega_jets is None else omega_jets
    Fj = F(z)
    X = _frame_fields(frame, n)(z)
    vals = _covariant_table(W, Fj, X, d.weights, k)
    polys = [dict() for _ in Fj]
    for mu, vs in vals.items():
        coef = float(taylor_coefficient(mu, d.weights, rule))
        e = MultiIndex(mu).exponent(n)
        for p, v in zip(polys, vs):
            p[e] = p.get(e, 0) + coef * v
    return polys


def _polynomial_coframe(coframe, d, degree):
    """Coframe coefficients as exact polynomials ``{exponent: float}``."""
    n = d.dim
    J = coframe(variables(d.x, degree))
    mons = monomials(n, degree)
    out = []
    for a in range(n):
        row = []
        for i in range(n):
            coeffs = np.asarray(J[a][i].coeffs)
            row.append({e: float(coeffs[idx]) for idx, e in enumerate(mons)
                        if abs(coeffs[idx]) > 1e-15})
        out.append(row)
    return out


def _poly_mul(p, q):
    out = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            e = tuple(x + y for x, y in zip(e1, e2))
            out[e] = out.get(e, 0.0) + c1 * c2
    return {e: c for e, c in out.items() if c != 0.0}


def two_form_functional(c, d, k, frame=None, coframe=None, rule="ray", kind="taylor-Fk",
                        connection_order=None):
    """``int_disk Tay(Omega; k)`` reduced to line moments.

    The curvature is expanded in the basis ``theta_a ^ theta_b`` of the given
    coframe (coordinate differentials by default); the coefficient of
    ``theta_a ^ theta_b`` is truncated at weight ``k - w_a - w_b``.  The
    coframe must consist of polynomial forms homogeneous of weight ``w_a``.
    """
    n = d.dim
    w = d.weights
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if w[a] + w[b] <= k]
    if not pairs:
        return ExpansionFunctional([], k, d.x, w, kind, c.q)
    budget = max(k - w[a] - w[b] for a, b in pairs)
    Xfn = _frame_fields(frame, n)

    def F(z):
        W = c.components(raise_order(z))
        Om = curvature_jets(W)
        if frame is None:
            return [Om[a][b] for a, b in pairs]
        X = Xfn(z)
        out = []
        for a, b in pairs:
            acc = None
            for i in range(n):
                for j in range(n):
                    term = Om[i][j] * (X[a][i] * X[b][j])
                    acc = term if acc is None else acc + term
            out.append(acc)
        return out

    try:
        polys = covariant_taylor(c, F, d, budget, frame=frame, rule=rule)
    except CapabilityError as exc:
        raise CapabilityError(f"curvature derivatives of order {_max_degree(d, budget)} "
                              f"unavailable: {exc}") from exc
    if coframe is None:
        basis = [[{(0,) * n: 1.0} if i == a else {} for i in range(n)] for a in range(n)]
    else:
        basis = _polynomial_coframe(coframe, d, max(w))
    terms = []
    for (a, b), poly in zip(pairs, polys):
        limit = k - w[a] - w[b]
        for i in range(n):
            for j in range(i + 1, n):
                wedge = {}
                for p1, p2, sgn in ((basis[a][i], basis[b][j], 1.0), (basis[a][j], basis[b][i], -1.0)):
                    for e, v in _poly_mul(p1, p2).items():
                        wedge[e] = wedge.get(e, 0.0) + sgn * v
                for e_t, C in poly.items():
                    if d.weight(e_t) > limit:
                        continue
                    if np.max(np.abs(C)) == 0.0:
                        continue
                    for e_w, v in wedge.items():
                        if v == 0.0:
                            continue
                        e = tuple(x + y for x, y in zip(e_t, e_w))
                        for fac, mu, jj in disk_monomial(e, i, j, d):
                            terms.append(ExpansionTerm(v * np.asarray(C), mu, jj, fac))
    return ExpansionFunctional(terms, k, d.x, w, kind, c.q)


def taylor_functional(c, d, k, frame=None, rule="ray"):
    """Gauge-free approximation ``F^k = int_disk Tay(Omega; k)``.

    Parameters
    ----------
    c : GaugeConnection
    d : DilationStructure
        Weights and centre; the centre is the loop base point.
    k : int
    frame : ModelSpace, optional
        Use its nilpotent (left-invariant) frame and coframe instead of
        coordinate derivatives and differentials.
    rule : {"ray", "symmetric"}

    Raises
    ------
    CapabilityError
        If the connection cannot supply enough partial derivatives.
    """
    if k < 0:
        raise PreconditionError("k must be non-negative")
    if frame is not None:
        return two_form_functional(c, d, k, frame.nilpotent_frame, frame.nilpotent_coframe, rule)
    return two_form_functional(c, d, k, rule=rule)


def euclidean_F3(c, center=None):
    """The explicit third-order functional for unit weights.

    ``1/2 Omega_ij(x) int z_i dz_j + 1/3 (d_k Omega_ij(x) + [omega_k(x), Omega_ij(x)])
    int z_i z_k dz_j`` summed over all ``i, j, k``.
    """
    x = c.basepoint if center is None else np.asarray(center, dtype=float)
    if x is None:
        raise PreconditionError("a centre is required")
    n = c.dim
    W = c.jets(x, 2)
    terms = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            O = W[j].deriv(i) - W[i].deriv(j) + W[i].truncate(1).bracket(W[j].truncate(1))
            O0 = O.value
            terms.append(ExpansionTerm(O0, (i,), j, Fraction(1, 2)))
            for k in range(n):
                dO = O.deriv(k).value
                w0 = W[k].value
                terms.append(ExpansionTerm(dO + w0 @ O0 - O0 @ w0, tuple(sorted((i, k))), j,
                                           Fraction(1, 3)))
    return ExpansionFunctional(terms, 3, x, (1,) * n, "euclidean-F3", c.q)


# ---------------------------------------------------------------------------
# selectors

def iota_chi(model, Om, z):
    """Coefficients ``(iota_chi eta)_i`` of the one-form ``eta(chi(.))``.

    ``Om[i][j]`` are jets of a two-form, ``z`` coordinate jets of the same order.
    """
    sel = model.require_selector()
    X = model.frame(z)
    A = model.coframe(z)
    n = model.dim
    out = [None] * n
    for a, entries in sel.items():
        for coef, b, cc in entries:
            val = None
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    term = Om[i][j] * (X[b][i] * X[cc][j])
                    val = term if val is None else val + term
            val = val * (coef(z) if callable(coef) else coef)
            for i in range(n):
                term = val * A[a][i]
                out[i] = term if out[i] is None else out[i] + term
    zero = Om[0][1] * 0.0
    return [zero if o is None else o for o in out]


def selector_modify(c, model):
    """Selector-modified connection ``omega + iota_chi Omega`` (step 2).

    Returns
    -------
    (GaugeConnection, CurvatureField)

    Raises
    ------
    CapabilityError
        If the model has no selector or is not of step 2.
    """
    model.require_selector()
    if model.dilation.step != 2:
        raise CapabilityError("selector modification is implemented for step-2 models")

    def components(z):
        W = c.components(raise_order(z))
        Om = curvature_jets(W)
        beta = iota_chi(model, Om, z)
        order = z[0].order
        return [W[i].truncate(order) + beta[i] for i in range(c.dim)]

    tilde = GaugeConnection(components, c.dim, c.q, c.basepoint, c.algebra, c.name + "~")
    return tilde, CurvatureField(tilde)


def selector_residual(c_tilde, model, points):
    """Largest ``|iota_chi Omega~|`` over ``points``."""
    z = variables(np.atleast_2d(np.asarray(points, dtype=float)), 0)
    Om = CurvatureField(c_tilde).components(z)
    beta = iota_chi(model, Om, z)
    return float(max(np.max(np.abs(b.value)) for b in beta))


def model_F5(c, model, k=5, frame="flat", rule="ray"):
    """Order-``k`` functional of the selector-modified curvature.

    Parameters
    ----------
    frame : {"flat", "nilpotent"}
        Coordinate or left-invariant Carnot frame for the covariant
        derivatives; both give the same polynomial two-form.
    """
    tilde, _ = selector_modify(c, model)
    kind = {"heisenberg": "heisenberg-F5", "hopf": "hopf-F5"}.get(model.name.split(":")[0],
                                                                  "taylor-Fk")
    d = model.dilation
    if frame == "nilpotent":
        F = two_form_functional(tilde, d, k, model.nilpotent_frame, model.nilpotent_coframe, rule)
    elif frame == "flat":
        F = two_form_functional(tilde, d, k, rule=rule)
    else:
        raise PreconditionError(f"unknown frame {frame!r}")
    F.kind = kind
    return F


def heisenberg_q_functional(c, model=None, leading=Fraction(1, 3)):
    """Order-5 Heisenberg functional ``sum_j int q^j (z_j theta - 2 z_3 dz_j)``.

    ``q^j = leading Psi^j + 1/4 (z_1 D_1 + z_2 D_2) Psi^j
    + 1/5 z_3 (D_3 Psi^j + [Omega^3, Psi^j]) + 1/10 (z_1^2 D_11 + z_1 z_2 (D_12 + D_21)
    + z_2^2 D_22) Psi^j`` with ``D`` the covariant derivatives of the unmodified
    connection along the left-invariant frame and
    ``Psi^j = Omega(Z_j, Z_3) + D_j Omega(Z_1, Z_2)``, all at the origin.
    The correct leading rational is 1/3; other values exist for testing.
    """
    from .models import make_heisenberg

    model = make_heisenberg() if model is None else model
    d = model.dilation
    x = d.x
    Zfn = model.nilpotent_frame

    def F(z):
        zp = raise_order(z, 2)
        W = c.components(zp)
        Om = curvature_jets(W)
        Z = Zfn(zp)
        Oz = []
        for a, b in ((0, 2), (1, 2), (0, 1)):
            acc = None
            for i in range(3):
                for j in range(3):
                    term = Om[i][j] * (Z[a][i] * Z[b][j])
                    acc = term if acc is None else acc + term
            Oz.append(acc)
        order = zp[0].order - 1
        out = []
        for j in range(2):
            # Psi^j = Omega^j + D_j Omega^3
            D = None
            for i in range(3):
                term = Z[j][i].truncate(order - 1) * (
                    Oz[2].deriv(i) + W[i].truncate(order - 1).bracket(Oz[2].truncate(order - 1)))
                D = term if D is None else D + term
            out.append(Oz[j].truncate(order - 1) + D)
        out.append(Oz[2].truncate(order - 1))
        return out

    z = variables(x, 3)
    W = c.components(z)
    X = Zfn(z)
    fields = F(z)
    vals = _covariant_table(W, fields[:2], X, (1, 1, 2), 2)
    Om3 = fields[2].value
    theta = [(0.5, (1,), 0), (-0.5, (0,), 1), (1.0, (), 2)]   # theta = dz + (y dx - x dy)/2
    terms = []
    for j in range(2):
        poly = {(): float(leading) * vals[()][j],
                (0,): 0.25 * vals[(0,)][j],
                (1,): 0.25 * vals[(1,)][j],
                (2,): 0.2 * (vals[(2,)][j] + Om3 @ vals[()][j] - vals[()][j] @ Om3),
                (0, 0): 0.1 * vals[(0, 0)][j],
                (0, 1): 0.1 * (vals[(0, 1)][j] + vals[(1, 0)][j]),
                (1, 1): 0.1 * vals[(1, 1)][j]}
        for mono, C in poly.items():
            # z_mu z_j theta
            for coef, extra, kk in theta:
                terms.append(ExpansionTerm(coef * C, tuple(sorted(mono + (j,) + extra)), kk))
            # -2 z_mu z_3 dz_j
            terms.append(ExpansionTerm(-2.0 * C, tuple(sorted(mono + (2,))), j))
    return ExpansionFunctional(terms, 5, x, d.weights, "heisenberg-F5", c.q)
