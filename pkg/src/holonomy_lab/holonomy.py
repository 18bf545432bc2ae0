"""Holonomy of loops and the radial-gauge transport path."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ChartDomainError, LogDomainError, PreconditionError
from .gauge import CurvatureField
from .jets import variables
from .liegroup import AlgebraPath, dexpinv_apply, group_residual, mat_log, norm, solve_transport
from .loops import length

__all__ = [
    "HolonomyResult",
    "connection_path",
    "default_steps",
    "holonomy",
    "ray_transport",
    "radial_transport_path",
]


@dataclass(frozen=True)
class HolonomyResult:
    """Holonomy group element with its logarithm when defined.

    Attributes
    ----------
    group_value : ndarray
    log_value : ndarray or None
        Principal logarithm; ``None`` when ``||group_value - I|| >= 1``.
    steps_used : int
    defect : float
        Distance from the unitary manifold (``||a* a - I||``).
    """

    group_value: np.ndarray
    log_value: object
    steps_used: int
    defect: float


def connection_path(c, loop):
    """The algebra path ``A(t) = -sum_k omega_k(gamma(t)) gamma_k'(t)``."""

    def sample(t):
        W = c.omega(loop.position(t))
        v = loop.velocity(t)
        return -np.einsum("tkab,tk->tab", W, v)

    return AlgebraPath(sample, tuple(loop.breakpoints))


def default_steps(c, loop, samples=513):
    """``max(500, ceil(200 * length * sup ||omega||))`` on the loop."""
    t = np.linspace(0.0, 1.0, samples)
    W = c.omega(loop.position(t))
    sup = float(np.max(norm(W)))
    ell = length(loop.with_metric(None) if loop.metric is not None else loop)
    return max(500, int(math.ceil(200 * ell * sup)))


def _check_based(c, loop):
    if c.basepoint is not None:
        gap = float(np.max(np.abs(loop.basepoint - c.basepoint)))
        if gap > 1e-12:
            raise PreconditionError(f"loop is based {gap:.3g} away from the connection basepoint")


def holonomy(c, loop, steps=None, path=None):
    """Holonomy of ``loop`` for connection ``c`` in its gauge.

    Parameters
    ----------
    c : GaugeConnection
    loop : LoopPath
    steps : int, optional
        Integrator steps; :func:`default_steps` when omitted.
    path : AlgebraPath, optional
        Use this path instead of :func:`connection_path` (for instance a
        radial transport path).
    """
    _check_based(c, loop)
    if steps is None:
        steps = default_steps(c, loop)
    A = connection_path(c, loop) if path is None else path
    a = solve_transport(A, steps)
    try:
        L = mat_log(a)
    except LogDomainError:
        L = None
    return HolonomyResult(a, L, int(steps), float(group_residual(a)))


# ---------------------------------------------------------------------------
# radial gauge

def ray_transport(c, d, points, nodes, substeps=4):
    """Transport along dilation rays ``u -> delta_u(z)`` from the centre.

    Parameters
    ----------
    points : ndarray (P, n)
    nodes : ndarray (R,)
        Increasing values of ``u`` in (0, 1] where the transport is recorded.

    Returns
    -------
    ndarray (R, P, q, q)
        ``g`` with ``g' = -omega(ray') g`` and ``g(0) = I``.
    """
    x, w = d.x, d.w
    dz = np.asarray(points, dtype=float) - x
    P = dz.shape[0]

    def A(u):
        fac = u ** w
        pos = x + fac * dz
        vel = w * u ** (w - 1) * dz
        return -np.einsum("pkab,pk->pab", c.omega(pos), vel)

    g = np.broadcast_to(np.eye(c.q, dtype=complex), (P, c.q, c.q)).copy()
    out = []
    u0 = 0.0
    for u1 in nodes:
        for a, b in zip(np.linspace(u0, u1, substeps + 1)[:-1], np.linspace(u0, u1, substeps + 1)[1:]):
            h = b - a
            A0, Am, A1 = A(a), A(a + 0.5 * h), A(b)
            k1 = A0
            k2 = dexpinv_apply(-0.5 * h * k1, Am, check=False)
            k3 = dexpinv_apply(-0.5 * h * k2, Am, check=False)
            k4 = dexpinv_apply(-h * k3, A1, check=False)
            g = expm(h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)) @ g
        out.append(g.copy())
        u0 = u1
    return np.array(out)


def radial_transport_path(c, d, loop, quad_nodes=64, chart_radius=np.inf, substeps=2):
    """Connection path of ``loop`` in the radial gauge centred at ``d.center``.

    With ``Omega`` the curvature in the radial gauge,
    ``A(t) = -int_0^1 (1/r) Omega(S(gamma_r), d_t gamma_r) dr`` where
    ``gamma_r = delta_r(gamma)`` and ``S`` is the radial field.  The radial
    gauge is obtained by parallel transport along dilation rays, so it is
    never constructed globally.
    """
    w = d.w
    x = d.x
    r, wr = np.polynomial.legendre.leggauss(quad_nodes)
    r = 0.5 * (r + 1.0)
    wr = 0.5 * wr
    curv = CurvatureField(c)

    def sample(t):
        gam = loop.position(t)
        vel = loop.velocity(t)
        dz = gam - x
        g = ray_transport(c, d, gam, r, substeps)
        total = 0
        for k in range(quad_nodes):
            fac = r[k] ** w
            pts = x + fac * dz
            if np.any(np.linalg.norm(pts, axis=-1) >= chart_radius):
                raise ChartDomainError("radial disk leaves the chart")
            Om = curv(pts)
            weight_i = w * r[k] ** w * dz / r[k]
            weight_j = fac * vel
            Oc = np.einsum("tijab,ti,tj->tab", Om, weight_i, weight_j)
            gk = g[k]
            Or = np.linalg.inv(gk) @ Oc @ gk
            total = total + wr[k] * Or
        return -total

    return AlgebraPath(sample, tuple(loop.breakpoints))
