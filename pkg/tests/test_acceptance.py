"""Acceptance suite: nine end-to-end criteria at their stated tolerances.

Each criterion is a function returning ``(passed, detail)``.  The tests print
one ``PASS``/``FAIL`` line per criterion (outside pytest's capture) and then
assert.  Running this file as a script prints the same lines.
"""

from fractions import Fraction

import numpy as np
import pytest

from holonomy_lab import (SweepConfig, dilate_loop, euclidean_F3, figure_eight, gauge_transform,
                          heisenberg_q_functional, holonomy, horizontal_lift, make_heisenberg,
                          make_hopf, picard_bound, picard_defect, picard_epsilon,
                          random_polynomial_connection, run_sweep, selector_modify,
                          selector_residual, su2, taylor_functional)
from holonomy_lab.freelie import free_nilpotent_rank
from holonomy_lab.gauge import random_gauge
from holonomy_lab.liegroup import norm, random_algebra_path
from holonomy_lab.loops import DilationStructure, moment_table, polygon
from oracles import hall_basis

SEED = 3


def _line(n, title, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {n} ({title}): {detail}"


# ---------------------------------------------------------------------------
# criteria

def criterion_1():
    scales = tuple(2.0 ** -k for k in range(2, 10))
    cfg = SweepConfig(model="euclidean:2", connection={"preset": "abelian", "curvature": 1.0},
                      loop={"family": "circle"}, scales=scales, expansion="F3")
    rep = run_sweep(cfg)
    worst = max(r.residual_norm for r in rep.rows)
    ok = rep.verdict == "exact" and worst <= 1e-9
    return ok, f"max ||log Hol + F3|| = {worst:.2e} over 8 circles (tol 1e-9)"


def criterion_2():
    base = dict(model="euclidean:2", connection={"preset": "random", "seed": SEED},
                loop={"family": "figure-eight", "skew": 0.3})
    with_f3 = run_sweep(SweepConfig(expansion="F3", declared_m=4, **base))
    without = run_sweep(SweepConfig(expansion="none", declared_m=2, **base))
    ok = with_f3.fitted_order >= 3.7 and 1.9 <= without.fitted_order <= 2.1
    return ok, (f"F3 order {with_f3.fitted_order:.3f} (>= 3.7); "
                f"bare order {without.fitted_order:.3f} (in [1.9, 2.1])")


def criterion_3():
    g = su2()
    c = random_polynomial_connection(2, g, SEED)
    d = DilationStructure.euclidean(2)
    loop = dilate_loop(figure_eight(1.0, 0.3), d, 0.25)
    F = taylor_functional(c, d, 3).evaluate(loop)
    H = holonomy(c, loop, steps=2000).group_value
    dF = dH = 0.0
    for k in range(10):
        ct = gauge_transform(c, random_gauge(2, g, 100 + k))
        dF = max(dF, float(norm(taylor_functional(ct, d, 3).evaluate(loop) - F)))
        dH = max(dH, float(norm(holonomy(ct, loop, steps=2000).group_value - H)))
    ok = dF <= 1e-10 and dH <= 1e-10
    return ok, f"F3 deviation {dF:.2e}, holonomy deviation {dH:.2e} (tol 1e-10)"


def criterion_4():
    cfg = SweepConfig(model="euclidean:2",
                      connection={"preset": "random", "seed": SEED, "flat_at_basepoint": True},
                      loop={"family": "figure-eight", "skew": 0.3},
                      scales=tuple(2.0 ** -k for k in range(1, 7)), expansion="Fk:5",
                      declared_m=6, steps={"min": 4000})
    rep = run_sweep(cfg)
    return rep.fitted_order >= 5.6, f"Fk:5 order {rep.fitted_order:.3f} (>= 5.6)"


def _heisenberg_cfg(expansion, declared_m):
    return SweepConfig(model="heisenberg", connection={"preset": "random", "seed": SEED},
                       loop={"family": "figure-eight", "bend": 0.3},
                       scales=tuple(2.0 ** -k for k in range(1, 7)), expansion=expansion,
                       declared_m=declared_m)


MUTATIONS = (Fraction(1, 2), Fraction(1, 4), Fraction(1, 6), Fraction(2, 3))


def criterion_5():
    sel = run_sweep(_heisenberg_cfg("selector-F5", 6))
    f3 = run_sweep(_heisenberg_cfg("F3", 4))
    mutated = {}
    for q in MUTATIONS:
        rep = run_sweep(_heisenberg_cfg("selector-F5", 6),
                        functional=lambda c, m, q=q: heisenberg_q_functional(c, m, leading=q))
        mutated[q] = rep.fitted_order
    worst = max(mutated.values())
    ok = sel.fitted_order >= 5.5 and f3.fitted_order <= 4.3 and worst < 4.5
    muts = ", ".join(f"{q}: {v:.2f}" for q, v in mutated.items())
    return ok, (f"selector-F5 order {sel.fitted_order:.3f} (>= 5.5); F3 order "
                f"{f3.fitted_order:.3f} (<= 4.3); mutated leading rational orders {muts} (< 4.5)")


def criterion_6():
    cfg = SweepConfig(model="hopf", connection={"preset": "random", "seed": SEED},
                      loop={"family": "figure-eight", "bend": 0.3, "radius": 0.5},
                      scales=tuple(2.0 ** -k for k in range(0, 6)), expansion="selector-F5",
                      declared_m=6)
    rep = run_sweep(cfg)
    return rep.fitted_order >= 5.4, f"selector-F5 order {rep.fitted_order:.3f} (>= 5.4)"


def criterion_7():
    rng = np.random.default_rng(SEED)
    g = su2()
    details = []
    ok = True
    for model, radius in ((make_heisenberg(), 1.0), (make_hopf(), 0.5)):
        c = random_polynomial_connection(3, g, SEED)
        tilde, _ = selector_modify(c, model)
        pts = rng.uniform(-radius, radius, (100, 3)) / np.sqrt(3)
        res = selector_residual(tilde, model, pts)
        loop = horizontal_lift(figure_eight(0.4, bend=0.3), model)
        dh = float(norm(holonomy(c, loop, steps=4000).group_value
                        - holonomy(tilde, loop, steps=4000).group_value))
        ok &= res <= 1e-9 and dh <= 1e-9
        details.append(f"{model.name}: iota residual {res:.1e}, holonomy change {dh:.1e}")
    return ok, "; ".join(details) + " (tol 1e-9)"


def criterion_8():
    g = su2()
    eps = picard_epsilon(g)
    worst = 0.0
    fails = 0
    for k in range(100):
        A = random_algebra_path(g, k, sup=0.5 * eps)
        ratio = picard_defect(A) / picard_bound(A, algebra=g)
        worst = max(worst, ratio)
        fails += ratio > 1.0
    return fails == 0, f"100 trials, {fails} violations, worst defect/bound = {worst:.3f}"


def criterion_9():
    g = su2()
    c = random_polynomial_connection(2, g, SEED)
    loop = figure_eight(0.5, 0.3)
    drift = holonomy(c, loop, steps=2000).defect
    a = [holonomy(c, loop, steps=n).group_value for n in (50, 100, 200)]
    ratio = float(norm(a[0] - a[1]) / norm(a[1] - a[2]))

    rng = np.random.default_rng(SEED)
    moment_err = 0.0
    for _ in range(50):
        m = int(rng.integers(3, 9))
        v = rng.normal(size=(m, 2))
        v -= v[0]
        area = 0.5 * sum(v[i, 0] * v[(i + 1) % m, 1] - v[(i + 1) % m, 0] * v[i, 1]
                         for i in range(m))
        M = moment_table(polygon(v), np.zeros(2), [((0,), 1), ((1,), 0), ((0,), 0), ((1,), 1)])
        for key, exact in ((((0,), 1), area), (((1,), 0), -area), (((0,), 0), 0.0),
                           (((1,), 1), 0.0)):
            moment_err = max(moment_err, abs(M[key] - exact))

    d = DilationStructure.euclidean(2)
    T = taylor_functional(c, d, 3).canonical()
    E = euclidean_F3(c).canonical()
    keys = set(T) | set(E)
    zero = np.zeros((2, 2))
    dual = max(float(np.max(np.abs(T.get(k, zero) - E.get(k, zero)))) for k in keys)
    same_keys = set(T) == set(E)

    hall = len(hall_basis("xy", 3))
    nu = free_nilpotent_rank(2, 3)

    ok = (drift <= 1e-10 and 12 <= ratio <= 20 and moment_err <= 1e-12 and dual <= 1e-12
          and same_keys and hall == nu == 5)
    return ok, (f"drift {drift:.1e}; self-convergence ratio {ratio:.2f}; polygon moments "
                f"{moment_err:.1e}; dual-path F3 {dual:.1e}; nu[2;3] = {nu}, Hall count {hall}")


CRITERIA = {
    1: ("abelian Stokes exactness", criterion_1),
    2: ("Euclidean order 4", criterion_2),
    3: ("gauge independence", criterion_3),
    4: ("radial-gauge order doubling", criterion_4),
    5: ("Heisenberg order 6", criterion_5),
    6: ("Hopf order 6", criterion_6),
    7: ("selector identities", criterion_7),
    8: ("Picard bound", criterion_8),
    9: ("kernel properties", criterion_9),
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    title, fn = CRITERIA[number]
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(number, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    for n, (title, fn) in CRITERIA.items():
        print(_line(n, title, *fn()))
