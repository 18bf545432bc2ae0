"""Built-in geometries: Euclidean space, Riemannian normal coordinates,
the Heisenberg group and the sub-Riemannian Hopf fibration on SU(2).

Frames and coframes are functions of coordinate jets returning lists of
scalar jets, ``frame(z)[a][i] = X_a^i`` and ``coframe(z)[a][i] = alpha_a^i``
(the coefficient of ``dz_i``).  The first ``rank`` frame fields span the
horizontal distribution and are orthonormal for its metric.

A selector is stored as ``{a: [(coef, b, c), ...]}`` meaning
``chi(X_a) = sum coef X_b ^ X_c``; unlisted indices map to zero.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CapabilityError, ChartDomainError, PreconditionError
from .jets import Jet, raise_order, variables
from .loops import DilationStructure, FunctionLoop, TrigLoop

__all__ = [
    "ModelSpace",
    "make_euclidean",
    "make_heisenberg",
    "make_hopf",
    "make_normal_coordinates",
    "sphere_normal_metric",
    "resolve_model",
    "lie_bracket",
    "nilpotent_limit",
    "selector_axiom_residual",
    "selector_coefficient",
    "contact_selector_coefficient",
    "frame_field",
    "horizontal_lift",
]


def _const(z, value):
    return Jet.constant(float(value), z[0].nvars, z[0].order, batch=z[0].batch_shape, vdim=0)


@dataclass(frozen=True)
class ModelSpace:
    """Geometry in privileged coordinates.

    Attributes
    ----------
    name : str
    dim : int
    dilation : DilationStructure
    rank : int
        Dimension of the horizontal distribution (``dim`` for Riemannian models).
    frame, coframe : callable
        Jet functions described in the module docstring.
    selector : dict or None
    chart_radius : float
    metric : callable or None
        Riemannian metric ``g(z)`` of shape (..., n, n), when the model is Riemannian.
    nilpotent_frame, nilpotent_coframe : callable or None
        Left-invariant frame of the tangent Carnot group in the same coordinates.
    brackets : dict or None
        Constant structure constants ``{(a, b): c}`` with ``[X_a, X_b] = sum c_k X_k``
        for ``a < b``, when the frame has them.
    """

    name: str
    dim: int
    dilation: DilationStructure
    rank: int
    frame: object
    coframe: object
    selector: dict = None
    chart_radius: float = math.inf
    metric: object = None
    nilpotent_frame: object = None
    nilpotent_coframe: object = None
    brackets: dict = None
    horizontal_tol: float = field(default=1e-12)

    # numerical evaluation -------------------------------------------------
    def check_chart(self, z):
        z = np.asarray(z, dtype=float)
        if np.isfinite(self.chart_radius) and np.any(
                np.linalg.norm(z, axis=-1) >= self.chart_radius):
            raise ChartDomainError(f"point outside the {self.name} chart "
                                   f"(|z| >= {self.chart_radius})")
        return z

    def frame_at(self, z):
        """Array (..., a, i) of frame coefficients ``X_a^i``."""
        F = self.frame(variables(self.check_chart(z), 0))
        return np.stack([np.stack([c.value for c in row], axis=-1) for row in F], axis=-2)

    def coframe_at(self, z):
        """Array (..., a, i) of coframe coefficients ``alpha_a^i``."""
        F = self.coframe(variables(self.check_chart(z), 0))
        return np.stack([np.stack([c.value for c in row], axis=-1) for row in F], axis=-2)

    def horizontal_defect(self, z, v):
        """Relative size of the vertical coframe components of ``v``."""
        if self.rank == self.dim:
            return np.zeros(np.shape(v)[:-1])
        a = np.einsum("...ai,...i->...a", self.coframe_at(z), v)
        vert = np.linalg.norm(a[..., self.rank:], axis=-1)
        return vert / np.maximum(np.linalg.norm(v, axis=-1), 1e-300)

    def speed(self, z, v):
        """Horizontal speed ``|v|_g``; ``inf`` for non-horizontal vectors."""
        z = np.asarray(z, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.metric is not None:
            g = self.metric(self.check_chart(z))
            return np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))
        a = np.einsum("...ai,...i->...a", self.coframe_at(z), v)
        sp = np.linalg.norm(a[..., :self.rank], axis=-1)
        if self.rank < self.dim:
            vert = np.linalg.norm(a[..., self.rank:], axis=-1)
            bad = vert > self.horizontal_tol * np.maximum(np.linalg.norm(v, axis=-1), 1.0)
            sp = np.where(bad, np.inf, sp)
        return sp

    def duality_residual(self, z):
        F = self.frame_at(z)
        C = self.coframe_at(z)
        return float(np.max(np.abs(np.einsum("...ai,...bi->...ab", C, F) - np.eye(self.dim))))

    def bracket_residual(self, z):
        """Largest deviation of ``[X_a, X_b]`` from the declared structure constants."""
        if self.brackets is None:
            raise CapabilityError(f"model {self.name!r} declares no structure constants")
        z = np.atleast_2d(np.asarray(z, dtype=float))
        F = self.frame_at(z)
        worst = 0.0
        for (a, b), c in self.brackets.items():
            br = lie_bracket(frame_field(self, a), frame_field(self, b), z)
            expected = np.einsum("k,pki->pi", np.asarray(c, dtype=float), F)
            worst = max(worst, float(np.max(np.abs(br - expected))))
        return worst

    def require_selector(self):
        if not self.selector:
            raise CapabilityError(f"model {self.name!r} has no selector")
        return self.selector


# ---------------------------------------------------------------------------
# Euclidean and Riemannian

def _structure(n, table):
    out = {(a, b): (0.0,) * n for a in range(n) for b in range(a + 1, n)}
    out.update(table)
    return out


def _identity_fields(n):
    def fn(z):
        one, zero = _const(z, 1.0), _const(z, 0.0)
        return [[one if i == a else zero for i in range(n)] for a in range(n)]
    return fn


def make_euclidean(n):
    """Euclidean ``R^n`` with coordinate frame and unit weights."""
    if n < 2:
        raise PreconditionError("Euclidean model needs n >= 2")
    fields = _identity_fields(n)
    return ModelSpace(f"euclidean:{n}", n, DilationStructure.euclidean(n), n, fields, fields,
                      metric=lambda z: np.broadcast_to(np.eye(n), np.shape(z)[:-1] + (n, n)),
                      nilpotent_frame=fields, nilpotent_coframe=fields,
                      brackets=_structure(n, {}))


def sphere_normal_metric(z):
    """Round unit-sphere metric in normal coordinates at a pole (any dimension)."""
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    r2 = np.sum(z * z, axis=-1)
    r = np.sqrt(r2)
    small = r < 1e-3
    safe = np.where(small, 1.0, r)
    exact = ((np.sin(safe) / safe) ** 2 - 1.0) / safe ** 2
    series = -1.0 / 3.0 + 2.0 * r2 / 45.0 - r2 * r2 / 315.0
    f = np.where(small, series, exact)
    eye = np.eye(n)
    return eye + f[..., None, None] * (r2[..., None, None] * eye - z[..., :, None] * z[..., None, :])


def _numeric_fields(metric, power):
    def fn(z):
        if z[0].order > 0:
            raise CapabilityError("metric-defined frames supply values only (order 0)")
        center = np.stack([zi.value for zi in z], axis=-1)
        g = metric(center)
        lam, V = np.linalg.eigh(g)
        M = np.einsum("...ia,...a,...ja->...ij", V, lam ** power, V)
        n = center.shape[-1]
        # rows are fields: frame row a = column a of g^{-1/2}
        return [[Jet(M[..., i, a][None], n, 0, 0) for i in range(n)] for a in range(n)]
    return fn


def make_normal_coordinates(metric, x0=None, h=1e-5, tol=1e-6, name="normal"):
    """Riemannian model from a metric already written in normal coordinates at ``x0``.

    Raises
    ------
    PreconditionError
        If ``metric(x0)`` is not the identity or a first partial of the metric
        does not vanish at ``x0``.
    """
    if isinstance(metric, str):
        metric = {"sphere": sphere_normal_metric,
                  "flat": lambda z: np.broadcast_to(np.eye(np.shape(z)[-1]),
                                                    np.shape(z)[:-1] + (np.shape(z)[-1],) * 2)
                  }[metric]
    x0 = np.zeros(2) if x0 is None else np.asarray(x0, dtype=float)
    n = x0.shape[0]
    g0 = np.asarray(metric(x0))
    if np.max(np.abs(g0 - np.eye(n))) > 1e-10:
        raise PreconditionError("metric is not the identity at the centre")
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dg = (np.asarray(metric(x0 + e)) - np.asarray(metric(x0 - e))) / (2 * h)
        i, j = np.unravel_index(np.argmax(np.abs(dg)), dg.shape)
        if abs(dg[i, j]) > tol:
            raise PreconditionError(
                f"partial d_{k + 1} g_{i + 1}{j + 1} = {dg[i, j]:.3g} does not vanish at the centre")
    return ModelSpace(name, n, DilationStructure.euclidean(n, x0), n,
                      _numeric_fields(metric, -0.5), _numeric_fields(metric, 0.5),
                      metric=metric)


# ---------------------------------------------------------------------------
# Heisenberg group

def _heis_frame(z):
    x, y, _ = z
    one, zero = _const(z, 1.0), _const(z, 0.0)
    return [[one, zero, -0.5 * y], [zero, one, 0.5 * x], [zero, zero, one]]


def _heis_coframe(z):
    x, y, _ = z
    one, zero = _const(z, 1.0), _const(z, 0.0)
    return [[one, zero, zero], [zero, one, zero], [0.5 * y, -0.5 * x, one]]


HEISENBERG_SELECTOR = {2: [(1.0, 0, 1)]}
HOPF_SELECTOR = {2: [(0.5, 0, 1)]}


def make_heisenberg():
    """Heisenberg group in exponential coordinates, weights (1, 1, 2)."""
    return ModelSpace("heisenberg", 3, DilationStructure((1, 1, 2)), 2, _heis_frame, _heis_coframe,
                      selector=HEISENBERG_SELECTOR, nilpotent_frame=_heis_frame,
                      nilpotent_coframe=_heis_coframe,
                      brackets=_structure(3, {(0, 1): (0.0, 0.0, 1.0)}))


# ---------------------------------------------------------------------------
# Hopf fibration

def _hopf_root(z):
    if np.any(z[0].value ** 2 + z[1].value ** 2 + z[2].value ** 2 >= 1.0):
        raise ChartDomainError("point outside the SU(2) chart |z| < 1")
    return (1.0 - z[0] * z[0] - z[1] * z[1] - z[2] * z[2]).sqrt()


def _hopf_frame(z):
    z1, z2, z3 = z
    r = _hopf_root(z)
    return [[r, z3, -z2], [-z3, r, z1], [z2, -z1, r]]


def _hopf_coframe(z):
    z1, z2, z3 = z
    r = _hopf_root(z)
    ir = r.reciprocal()
    rows = [[r, z3, -z2], [-z3, r, z1], [z2, -z1, r]]
    return [[rows[a][i] + z[a] * z[i] * ir for i in range(3)] for a in range(3)]


def _hopf_nil_frame(z):
    z1, z2, _ = z
    one, zero = _const(z, 1.0), _const(z, 0.0)
    return [[one, zero, -z2], [zero, one, z1], [zero, zero, one]]


def _hopf_nil_coframe(z):
    z1, z2, _ = z
    one, zero = _const(z, 1.0), _const(z, 0.0)
    return [[one, zero, zero], [zero, one, zero], [z2, -z1, one]]


def _hopf_printed_frame(z):
    z1, z2, z3 = z
    r = _hopf_root(z)
    ir = r.reciprocal()
    rows = [[r, z3, -z2], [-z3, r, z1], [z2, -z1, r]]
    return [[rows[a][i] + z[a] * z[i] * ir for i in range(3)] for a in range(3)]


def _hopf_printed_coframe(z):
    z1, z2, z3 = z
    r = _hopf_root(z)
    return [[r, z3, -z2], [-z3, r, z1], [z2, -z1, r]]


def contact_selector_coefficient(frame, coframe):
    """Coefficient ``c = -1 / d alpha_3(X_1, X_2)`` of ``chi(X_3) = c X_1 ^ X_2``.

    This is the value forced by the selector axiom for a rank-2 distribution
    in dimension 3; it is returned as a jet function.
    """

    def coef(z):
        zp = raise_order(z)
        A = coframe(zp)[2]
        X = frame(z)
        order = z[0].order
        acc = None
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                term = (A[j].deriv(i) - A[i].deriv(j)) * (X[0][i].truncate(order) * X[1][j].truncate(order))
                acc = term if acc is None else acc + term
        return (acc * -1.0).reciprocal()

    return coef


def make_hopf(chart_radius=0.9, variant="su2"):
    """Sub-Riemannian SU(2) with horizontal frame ``X_1, X_2``.

    Parameters
    ----------
    chart_radius : float
    variant : {"su2", "printed"}
        ``"su2"`` uses the left-invariant frame ``X_a = r e_a + z x e_a``
        (``r = sqrt(1 - |z|^2)``) of the unit quaternions in the vector-part
        chart, with ``[X_1, X_2] = 2 X_3`` cyclically and selector
        ``chi(X_3) = X_1 ^ X_2 / 2``.  ``"printed"`` uses the dual pair in
        which the radial term ``z_a z / r`` sits on the frame instead of the
        coframe; its brackets are not constant and the selector coefficient
        varies with the point.
    """
    if variant == "su2":
        frame, coframe, selector, name = _hopf_frame, _hopf_coframe, HOPF_SELECTOR, "hopf"
        brackets = {(0, 1): (0.0, 0.0, 2.0), (0, 2): (0.0, -2.0, 0.0), (1, 2): (2.0, 0.0, 0.0)}
    elif variant == "printed":
        frame, coframe, name = _hopf_printed_frame, _hopf_printed_coframe, "hopf:printed"
        selector = {2: [(contact_selector_coefficient(frame, coframe), 0, 1)]}
        brackets = None
    else:
        raise PreconditionError(f"unknown hopf variant {variant!r}")

    def checked(fn):
        def inner(z):
            if np.any(np.sqrt(sum(zi.value ** 2 for zi in z)) >= chart_radius):
                raise ChartDomainError(f"point outside the hopf chart (|z| >= {chart_radius})")
            return fn(z)
        return inner

    return ModelSpace(name, 3, DilationStructure((1, 1, 2)), 2, checked(frame), checked(coframe),
                      selector=selector, chart_radius=chart_radius,
                      nilpotent_frame=_hopf_nil_frame, nilpotent_coframe=_hopf_nil_coframe,
                      brackets=brackets)


def resolve_model(key):
    """Model from a configuration name: ``euclidean:n``, ``heisenberg``, ``hopf``,
    ``hopf:printed``, ``normal:sphere`` or ``normal:flat``."""
    if isinstance(key, ModelSpace):
        return key
    name, _, arg = str(key).partition(":")
    if name == "euclidean":
        return make_euclidean(int(arg or 2))
    if name == "heisenberg":
        return make_heisenberg()
    if name == "hopf":
        return make_hopf(variant=arg or "su2")
    if name == "normal":
        return make_normal_coordinates(arg or "sphere", name=key)
    raise PreconditionError(f"unknown model {key!r}")


# ---------------------------------------------------------------------------
# identities

def lie_bracket(X, Y, z):
    """Coordinate coefficients of ``[X, Y]`` at points ``z`` for jet vector fields."""
    zz = variables(np.asarray(z, dtype=float), 1)
    Xc, Yc = X(zz), Y(zz)
    n = len(zz)
    out = []
    for k in range(n):
        val = 0
        for i in range(n):
            val = val + Xc[i].value * Yc[k].deriv(i).value - Yc[i].value * Xc[k].deriv(i).value
        out.append(val)
    return np.stack(out, axis=-1)


def frame_field(model, a, nilpotent=False):
    fn = model.nilpotent_frame if nilpotent else model.frame
    return lambda z: fn(z)[a]


def nilpotent_limit(model, a, z, s_values=(1e-2, 1e-3)):
    """Richardson extrapolation of ``s^{w_a} delta_s^* X_a`` as ``s -> 0``.

    The blow-up is even in ``s`` for the built-in models, so the
    extrapolation eliminates the ``s^2`` term.
    """
    d = model.dilation
    w = d.w
    wa = w[a]
    z = np.asarray(z, dtype=float)
    vals = []
    for s in s_values:
        X = model.frame_at(d.dilate(z, s))[..., a, :]
        vals.append(s ** wa * s ** (-w) * X)
    s1, s2 = s_values
    return (s1 ** 2 * vals[1] - s2 ** 2 * vals[0]) / (s1 ** 2 - s2 ** 2)


def selector_coefficient(coef, z):
    """Numerical values of a selector coefficient (constant or jet function) at points."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if callable(coef):
        return np.asarray(coef(variables(z, 0)).value)
    return np.full(z.shape[0], float(coef))


def selector_axiom_residual(model, z, rng):
    """Check the selector axioms at points ``z`` on random covectors and vectors.

    Returns the largest violation of

    * ``chi(X_a) = 0`` for horizontal ``a`` (``chi(D) = 0``) and
    * ``alpha(v) + d alpha(chi(v)) = 0`` for ``alpha = f alpha_3`` with a
      random function ``f`` (value and gradient drawn at random).
    """
    sel = model.require_selector()
    worst = 0.0
    for a in range(model.rank):
        if sel.get(a):
            worst = max(worst, 1.0)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zz = variables(z, 1)
    X = model.frame(zz)
    C = model.coframe(zz)
    n = model.dim
    Xv = np.stack([np.stack([c.value for c in row], -1) for row in X], -2)
    for p in range(z.shape[0]):
        for a_vert in range(model.rank, n):
            f0 = rng.normal()
            df = rng.normal(size=n)
            v = rng.normal(size=n)
            alpha = np.array([C[a_vert][i].value[p] for i in range(n)])
            # d(f alpha) = df ^ alpha + f d alpha
            dalpha = np.array([[C[a_vert][j].deriv(i).value[p] - C[a_vert][i].deriv(j).value[p]
                                for j in range(n)] for i in range(n)])
            dform = np.outer(df, alpha) - np.outer(alpha, df) + f0 * dalpha
            vf = np.linalg.solve(Xv[p].T, v)
            total = f0 * alpha @ v
            for b, terms in sel.items():
                for coef, i, j in terms:
                    cval = selector_coefficient(coef, z[p:p + 1])[0]
                    total += vf[b] * cval * (Xv[p, i] @ dform @ Xv[p, j])
            worst = max(worst, abs(total) / max(1.0, np.linalg.norm(v)))
    return worst


# ---------------------------------------------------------------------------
# horizontal lifts

def _planar_symmetric(planar, tol=1e-13):
    t = np.linspace(0.0, 1.0, 97)
    return np.max(np.abs(planar.position(1.0 - t) + planar.position(t))) <= tol


def horizontal_lift(planar, model, rtol=1e-13, atol=1e-16):
    """Horizontal lift through the origin of a closed planar loop.

    The first two coordinates follow ``planar``; the third solves
    ``alpha_3(gamma') = 0``.  For the Heisenberg model and trigonometric
    loops the lift is exact; otherwise it is integrated numerically.  Loops
    with ``p(1 - t) = -p(t)`` (the balanced figure-eight) are integrated on
    half the period and mirrored, which closes the lift exactly.

    Raises
    ------
    PreconditionError
        If the lift does not close.
    """
    if model.dim != 3 or model.rank != 2:
        raise CapabilityError("horizontal lifts are implemented for rank-2 models in dimension 3")
    if model.name == "heisenberg" and isinstance(planar, TrigLoop):
        return _heisenberg_trig_lift(planar, model)

    def rhs(t, z3):
        p = planar.position(np.array([t]))[0]
        v = planar.velocity(np.array([t]))[0]
        C = model.coframe_at(np.array([p[0], p[1], z3[0]]))
        return [-(C[2, 0] * v[0] + C[2, 1] * v[1]) / C[2, 2]]

    symmetric = _planar_symmetric(planar)
    t_end = 0.5 if symmetric else 1.0
    bps = [b for b in planar.breakpoints if b < t_end]
    edges = [0.0] + bps + [t_end]
    sols = []
    z0 = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(rhs, (a, b), [z0], method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True)
        sols.append((a, b, sol.sol))
        z0 = sol.y[0, -1]
    if not symmetric and abs(z0) > 1e-12:
        raise PreconditionError(f"horizontal lift does not close (gap {z0:.3g})")

    def third(t):
        t = np.asarray(t, dtype=float)
        tt = np.where(t > 0.5, 1.0 - t, t) if symmetric else t
        out = np.empty_like(tt)
        for a, b, s in sols:
            m = (tt >= a) & (tt <= b)
            if np.any(m):
                out[m] = s(tt[m])[0]
        return out

    def position(t):
        p = planar.position(t)
        return np.column_stack([p[:, 0], p[:, 1], third(t)])

    def velocity(t):
        pos = position(t)
        v = planar.velocity(t)
        C = model.coframe_at(pos)
        vz = -(C[:, 2, 0] * v[:, 0] + C[:, 2, 1] * v[:, 1]) / C[:, 2, 2]
        return np.column_stack([v[:, 0], v[:, 1], vz])

    return FunctionLoop(position, velocity, 3, planar.breakpoints, model)


def _heisenberg_trig_lift(planar, model):
    c = planar.fourier()
    K = (c.shape[0] - 1) // 2
    k = np.arange(-K, K + 1)
    x, y = c[:, 0], c[:, 1]
    dx, dy = 2j * np.pi * k * x, 2j * np.pi * k * y
    integrand = 0.5 * (np.convolve(x, dy) - np.convolve(y, dx))
    kk = np.arange(-2 * K, 2 * K + 1)
    scale = max(1.0, float(np.max(np.abs(integrand))))
    if abs(integrand[2 * K]) > 1e-14 * scale:
        raise PreconditionError(
            f"planar loop has signed area {integrand[2 * K].real:.3g}; its lift does not close")
    zc = np.zeros_like(integrand)
    nz = kk != 0
    zc[nz] = integrand[nz] / (2j * np.pi * kk[nz])
    zc[2 * K] = -np.sum(zc[nz])
    full = np.zeros((4 * K + 1, 3), dtype=complex)
    full[K:3 * K + 1, 0] = x
    full[K:3 * K + 1, 1] = y
    full[:, 2] = zc
    return TrigLoop.from_fourier(full, metric=model)
