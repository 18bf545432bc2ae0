"""Command-line interface.

Exit codes: 0 when every verdict passes, 2 on a verdict failure, 1 on errors.
"""

import argparse
import json
import sys

import numpy as np

from .errors import CapabilityError, HolonomyLabError
from .experiment import (build_connection, build_expansion, emit_report, load_config, run_sweep,
                         scaled_loop)
from .holonomy import holonomy
from .liegroup import norm, picard_bound, picard_defect, picard_epsilon, random_algebra_path, su2
from .models import nilpotent_limit, resolve_model, selector_axiom_residual

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _matrix(A):
    A = np.asarray(A, dtype=complex)
    return {"re": A.real.tolist(), "im": A.imag.tolist()}


def cmd_sweep(args):
    cfg = load_config(args.config)
    report = run_sweep(cfg)
    if args.output:
        emit_report(report, args.format, args.output)
    elif cfg.output is None:
        sys.stdout.write(report.to_csv() if args.format == "csv"
                         else json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"verdict={report.verdict} fitted_order={report.fitted_order:.4f} "
          f"interval=({report.interval[0]:.4f}, {report.interval[1]:.4f}) "
          f"declared_m={report.declared_m:g}", file=sys.stderr)
    return EXIT_OK if report.verdict in ("pass", "exact") else EXIT_FAIL


def cmd_holonomy(args):
    cfg = load_config(args.config)
    model = resolve_model(cfg.model)
    c = build_connection(cfg, model)
    loop = scaled_loop(cfg, model, args.scale)
    h = holonomy(c, loop, steps=args.steps)
    out = {"scale": args.scale, "steps": h.steps_used, "defect": h.defect,
           "group_value": _matrix(h.group_value),
           "log_value": None if h.log_value is None else _matrix(h.log_value)}
    F = build_expansion(cfg, c, model)
    if F is not None and h.log_value is not None:
        out["residual_norm"] = float(norm(h.log_value + F.evaluate(loop)))
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _check(name, value, tol, lines):
    ok = value <= tol
    lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} (tol {tol:g})")
    return ok


def cmd_check_model(args):
    model = resolve_model(args.name)
    rng = np.random.default_rng(args.seed)
    radius = min(0.5, 0.5 * model.chart_radius)
    pts = rng.uniform(-radius, radius, (50, model.dim)) / np.sqrt(model.dim)
    lines = [f"model {model.name}: dim={model.dim} rank={model.rank} "
             f"weights={model.dilation.weights}"]
    ok = _check("frame/coframe duality", model.duality_residual(pts), 1e-12, lines)
    if model.brackets is not None:
        try:
            ok &= _check("structure constants", model.bracket_residual(pts), 1e-9, lines)
        except CapabilityError as exc:
            lines.append(f"SKIP structure constants: {exc}")
    else:
        lines.append("SKIP structure constants: frame has none")
    if model.selector:
        ok &= _check("selector axioms", selector_axiom_residual(model, pts[:10], rng), 1e-9, lines)
    if model.nilpotent_frame is not None and model.rank < model.dim:
        from .jets import variables

        Z = model.nilpotent_frame(variables(pts, 0))
        worst = 0.0
        for a in range(model.dim):
            lim = nilpotent_limit(model, a, pts)
            worst = max(worst, float(np.max(np.abs(lim - np.stack([c.value for c in Z[a]], -1)))))
        ok &= _check("nilpotentization limit", worst, 1e-6, lines)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bound_fuzz(args):
    g = su2()
    eps = picard_epsilon(g)
    worst = 0.0
    failures = 0
    for k in range(args.trials):
        A = random_algebra_path(g, args.seed + k, sup=0.5 * eps)
        bound = picard_bound(A, algebra=g)
        defect = picard_defect(A)
        worst = max(worst, defect / bound)
        failures += defect > bound
    print(f"trials={args.trials} eps={eps:.6g} worst_ratio={worst:.4g} failures={failures}")
    return EXIT_OK if failures == 0 else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="holonomy-lab",
                                description="Holonomy of small loops and its expansions.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sweep", help="run a dilation sweep from a TOML configuration")
    s.add_argument("config")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--output")
    s.set_defaults(func=cmd_sweep)
    h = sub.add_parser("holonomy", help="holonomy of the configured loop at one scale")
    h.add_argument("config")
    h.add_argument("--scale", type=float, required=True)
    h.add_argument("--steps", type=int)
    h.set_defaults(func=cmd_holonomy)
    m = sub.add_parser("check-model", help="verify the identities of a built-in model")
    m.add_argument("name")
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=cmd_check_model)
    b = sub.add_parser("bound-fuzz", help="compare the Picard bound with measured defects")
    b.add_argument("--trials", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bound_fuzz)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HolonomyLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
