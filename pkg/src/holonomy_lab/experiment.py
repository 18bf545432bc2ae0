"""Dilation sweeps, convergence-order fits and reports.

A sweep evaluates ``||log Hol(delta_s gamma) + F(delta_s gamma)||`` for a
decreasing list of scales ``s`` and fits the slope of the logarithm of that
residual against the logarithm of the loop length.
"""

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import tomli
from scipy import stats

from .errors import (ChartDomainError, ConfigError, InsufficientDataError, LogDomainError,
                     PreconditionError)
from .expansion import euclidean_F3, model_F5, taylor_functional
from .gauge import (abelian_constant_curvature, random_polynomial_connection, su2_example,
                    zero_connection)
from .holonomy import holonomy
from .liegroup import ALGEBRAS, norm
from .loops import circle, dilate_loop, figure_eight, length, lissajous, polygon
from .models import horizontal_lift, resolve_model

__all__ = [
    "SweepConfig",
    "SweepRow",
    "ConvergenceReport",
    "load_config",
    "build_connection",
    "build_loop",
    "build_expansion",
    "scaled_loop",
    "run_sweep",
    "fit_order",
    "emit_report",
    "read_report",
    "CSV_COLUMNS",
    "THREADS_ENV",
]

CSV_COLUMNS = ("scale", "length", "hol_log_norm", "residual_norm", "steps", "integrator_residual")
THREADS_ENV = "HOLONOMY_LAB_THREADS"
EXACT_TOL = 1e-9
GUARD_FACTOR = 10.0

DEFAULT_SCALES = tuple(2.0 ** -k for k in range(2, 10))
_CONNECTION_KEYS = {"preset", "seed", "degree", "algebra", "amplitude", "flat_at_basepoint",
                    "curvature"}
_LOOP_KEYS = {"family", "radius", "skew", "bend", "p", "q", "phase", "vertices"}
_STEPS_KEYS = {"min", "factor", "max"}
_FIT_KEYS = {"tolerance"}
_TOP_KEYS = {"model", "scales", "expansion", "declared_m", "output", "seed"}


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class SweepConfig:
    """Experiment description.

    Attributes
    ----------
    model : str
        ``euclidean:n``, ``heisenberg``, ``hopf``, ``hopf:printed`` or ``normal:<preset>``.
    connection : dict
        ``preset`` (``random``, ``abelian``, ``su2-example``, ``zero``), ``seed``,
        ``degree``, ``algebra``, ``amplitude``, ``flat_at_basepoint``, ``curvature``.
    loop : dict
        ``family`` (``circle``, ``figure-eight``, ``lissajous``, ``polygon``) and
        its parameters.  On sub-Riemannian models the planar loop is lifted
        horizontally.
    scales : tuple of float
        Strictly decreasing values in (0, 1].
    expansion : str
        ``none``, ``F3``, ``Fk:<k>`` or ``selector-F5``.
    declared_m : float
        Expected order; the verdict passes when the fitted order is at least
        ``declared_m - tolerance``.
    steps : dict
        ``min``, ``factor`` and ``max`` of the step policy
        ``clip(ceil(factor * length * sup ||omega||), min, max)``.
    tolerance : float
    output : str or None
    seed : int
    """

    model: str = "euclidean:2"
    connection: dict = field(default_factory=lambda: {"preset": "random"})
    loop: dict = field(default_factory=lambda: {"family": "figure-eight"})
    scales: tuple = DEFAULT_SCALES
    expansion: str = "F3"
    declared_m: float = 4.0
    steps: dict = field(default_factory=dict)
    tolerance: float = 0.3
    output: str = None
    seed: int = 0

    def __post_init__(self):
        s = tuple(float(x) for x in self.scales)
        object.__setattr__(self, "scales", s)
        if not s:
            raise ConfigError("scales must not be empty")
        if any(not (0.0 < x <= 1.0) for x in s):
            raise ConfigError("scales must lie in (0, 1]")
        if any(b >= a for a, b in zip(s[:-1], s[1:])):
            raise ConfigError("scales must be strictly decreasing")
        if self.declared_m < 2:
            raise ConfigError("declared_m must be >= 2")
        _parse_expansion(self.expansion)
        for name, allowed in (("connection", _CONNECTION_KEYS), ("loop", _LOOP_KEYS),
                              ("steps", _STEPS_KEYS)):
            extra = set(getattr(self, name)) - allowed
            if extra:
                raise ConfigError(f"unknown {name} keys: {sorted(extra)}")

    @property
    def step_policy(self):
        pol = {"min": 500, "factor": 200.0, "max": 200000}
        pol.update(self.steps)
        return pol

    def to_dict(self):
        d = asdict(self)
        d["scales"] = list(self.scales)
        return d


def _parse_expansion(text):
    if text in ("none", "F3", "selector-F5"):
        return text, None
    if text.startswith("Fk:"):
        try:
            return "Fk", int(text[3:])
        except ValueError:
            pass
    raise ConfigError(f"unknown expansion {text!r}")


def _unflatten(data, prefix=""):
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_unflatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def load_config(source):
    """Read a TOML configuration with dotted keys (``loop.family = "circle"``).

    Parameters
    ----------
    source : str or path-like
        File path, or TOML text when it contains a newline or ``=``.

    Raises
    ------
    ConfigError
        On unreadable files, syntax errors and unknown keys.
    """
    text = str(source)
    if "\n" not in text and "=" not in text:
        try:
            with open(text, "rb") as fh:
                raw = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {text}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{text}: {exc}") from exc
    else:
        try:
            raw = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(str(exc)) from exc
    flat = _unflatten(raw)
    kw = {"connection": {}, "loop": {}, "steps": {}}
    for key, value in flat.items():
        head, _, rest = key.partition(".")
        if head in ("connection", "loop", "steps") and rest:
            kw[head][rest] = value
        elif head == "fit" and rest in _FIT_KEYS:
            kw["tolerance"] = float(value)
        elif key in _TOP_KEYS:
            kw[key] = value
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    if not kw["connection"]:
        kw.pop("connection")
    if not kw["loop"]:
        kw.pop("loop")
    return SweepConfig(**kw)


# ---------------------------------------------------------------------------
# builders

def build_connection(cfg, model):
    params = dict(cfg.connection)
    preset = params.get("preset", "random")
    if preset == "random":
        name = params.get("algebra", "su2")
        if name not in ALGEBRAS:
            raise ConfigError(f"unknown algebra {name!r}")
        algebra = ALGEBRAS[name]()
        return random_polynomial_connection(
            model.dim, algebra, int(params.get("seed", cfg.seed)), degree=int(params.get("degree", 3)),
            amplitude=float(params.get("amplitude", 1.0)),
            flat_at_basepoint=bool(params.get("flat_at_basepoint", False)))
    if preset == "abelian":
        if model.dim != 2:
            raise ConfigError("the abelian preset lives on two-dimensional models")
        return abelian_constant_curvature(np.array([[1j * float(params.get("curvature", 1.0))]]))
    if preset == "su2-example":
        if model.dim != 2:
            raise ConfigError("the su2-example preset lives on two-dimensional models")
        return su2_example()
    if preset == "zero":
        return zero_connection(model.dim)
    raise ConfigError(f"unknown connection preset {preset!r}")


def build_loop(cfg, radius=None):
    """Planar base loop of the configured family (radius overridable)."""
    params = dict(cfg.loop)
    family = params.get("family", "figure-eight")
    r = float(params.get("radius", 1.0)) if radius is None else radius
    if family == "circle":
        return circle(r)
    if family == "figure-eight":
        return figure_eight(r, float(params.get("skew", 0.0)), bend=float(params.get("bend", 0.0)))
    if family == "lissajous":
        return lissajous(r, int(params.get("p", 1)), int(params.get("q", 2)), float(params.get("phase", 0.0)))
    if family == "polygon":
        v = np.asarray(params.get("vertices", [[0, 0], [1, 0], [0, 1]]), dtype=float) * r
        return polygon(v - v[0])
    raise ConfigError(f"unknown loop family {family!r}")


def _embed_loop(loop, dim):
    if loop.dim == dim:
        return loop
    from .loops import FunctionLoop

    def pos(t):
        out = np.zeros((len(np.atleast_1d(t)), dim))
        out[:, :2] = loop.position(t)
        return out

    def vel(t):
        out = np.zeros((len(np.atleast_1d(t)), dim))
        out[:, :2] = loop.velocity(t)
        return out

    return FunctionLoop(pos, vel, dim, loop.breakpoints)


def scaled_loop(cfg, model, s):
    """The loop of scale ``s``: dilated base loop, or horizontal lift of the scaled planar loop."""
    if model.rank < model.dim:
        if model.name == "heisenberg":
            base = horizontal_lift(build_loop(cfg), model)
            return dilate_loop(base, model.dilation, s)
        r = float(cfg.loop.get("radius", 1.0)) * s
        return horizontal_lift(build_loop(cfg, radius=r), model)
    base = _embed_loop(build_loop(cfg), model.dim)
    return dilate_loop(base, model.dilation, s).with_metric(model)


def build_expansion(cfg, c, model):
    kind, k = _parse_expansion(cfg.expansion)
    if kind == "none":
        return None
    if kind == "F3":
        if any(w != 1 for w in model.dilation.weights):
            return euclidean_F3(c, model.dilation.x)
        return taylor_functional(c, model.dilation, 3)
    if kind == "Fk":
        return taylor_functional(c, model.dilation, k)
    return model_F5(c, model)


# ---------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class SweepRow:
    scale: float
    length: float
    hol_log_norm: float
    residual_norm: float
    steps: int
    integrator_residual: float


@dataclass
class ConvergenceReport:
    """Result of :func:`run_sweep`.

    ``fitted_order`` and ``interval`` are ``nan`` when no fit was made (the
    ``exact`` verdict or too few usable rows).
    """

    rows: list
    fitted_order: float = math.nan
    interval: tuple = (math.nan, math.nan)
    window: tuple = ()
    verdict: str = "fail"
    declared_m: float = math.nan
    tolerance: float = 0.3
    notes: str = ""

    def to_dict(self):
        g = "%.17g"
        return {
            "rows": [{k: (str(v) if k == "steps" else g % v) for k, v in asdict(r).items()}
                     for r in self.rows],
            "fitted_order": g % self.fitted_order,
            "interval": [g % x for x in self.interval],
            "window": list(self.window),
            "verdict": self.verdict,
            "declared_m": g % self.declared_m,
            "tolerance": g % self.tolerance,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d):
        rows = [SweepRow(float(r["scale"]), float(r["length"]), float(r["hol_log_norm"]),
                         float(r["residual_norm"]), int(r["steps"]), float(r["integrator_residual"]))
                for r in d["rows"]]
        return cls(rows, float(d["fitted_order"]), tuple(float(x) for x in d["interval"]),
                   tuple(d["window"]), d["verdict"], float(d["declared_m"]), float(d["tolerance"]),
                   d.get("notes", ""))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(["%.17g" % r.scale, "%.17g" % r.length, "%.17g" % r.hol_log_norm,
                        "%.17g" % r.residual_norm, r.steps, "%.17g" % r.integrator_residual])
        return buf.getvalue()


def emit_report(report, format, path):
    """Write ``report`` as ``csv`` or ``json`` to ``path``.

    Raises
    ------
    OSError
        With the path in the message when the file cannot be written.
    """
    if format == "csv":
        text = report.to_csv()
    elif format == "json":
        text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    else:
        raise PreconditionError(f"unknown report format {format!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report(path):
    with open(path) as fh:
        return ConvergenceReport.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# fitting

def fit_order(rows, guard=GUARD_FACTOR, skip_largest=True):
    """Least-squares slope of ``log residual`` against ``log length``.

    Rows whose residual is at most ``guard`` times their integrator residual
    are discarded, as is the largest scale when ``skip_largest``.

    Returns
    -------
    slope : float
    interval : (float, float)
        95% confidence interval from the t distribution.
    window : tuple of int
        Indices of the rows used.

    Raises
    ------
    InsufficientDataError
        With fewer than four usable rows.
    """
    rows = list(rows)
    if not rows:
        raise InsufficientDataError("no rows to fit")
    largest = max(range(len(rows)), key=lambda i: rows[i].scale)
    window = tuple(i for i, r in enumerate(rows)
                   if r.residual_norm > guard * r.integrator_residual and r.residual_norm > 0
                   and not (skip_largest and i == largest))
    if len(window) < 4:
        raise InsufficientDataError(f"{len(window)} usable rows; at least 4 are needed")
    x = np.log([rows[i].length for i in window])
    y = np.log([rows[i].residual_norm for i in window])
    res = stats.linregress(x, y)
    half = stats.t.ppf(0.975, len(window) - 2) * res.stderr
    return float(res.slope), (float(res.slope - half), float(res.slope + half)), window


# ---------------------------------------------------------------------------
# sweeps

def _threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer")


def _steps_for(c, loop, policy):
    t = np.linspace(0.0, 1.0, 513)
    sup = float(np.max(norm(c.omega(loop.position(t)))))
    ell = length(loop.with_metric(None))
    n = math.ceil(policy["factor"] * ell * sup)
    return int(min(policy["max"], max(policy["min"], n)))


def _row(cfg, model, c, F, s):
    try:
        loop = scaled_loop(cfg, model, s)
        steps = _steps_for(c, loop, cfg.step_policy)
        h1 = holonomy(c, loop, steps=steps)
        h2 = holonomy(c, loop, steps=2 * steps)
    except ChartDomainError as exc:
        raise ChartDomainError(f"scale {s:g}: {exc}") from exc
    if h2.log_value is None or h1.log_value is None:
        raise LogDomainError(f"scale {s:g}: holonomy too far from the identity for the "
                             "logarithm; shrink the scales")
    L = h2.log_value
    resid = L if F is None else L + F.evaluate(loop)
    ell = length(loop.with_metric(model))
    return SweepRow(float(s), float(ell), float(norm(L)), float(norm(resid)), int(2 * steps),
                    float(norm(h2.log_value - h1.log_value)))


def run_sweep(cfg, functional=None):
    """Run the dilation sweep described by ``cfg``.

    Parameters
    ----------
    cfg : SweepConfig
    functional : callable, optional
        ``functional(connection, model)`` returning the expansion to subtract;
        overrides ``cfg.expansion``.

    Raises
    ------
    LogDomainError
        If a holonomy leaves the logarithm domain (advises smaller scales).
    ChartDomainError
        If a loop leaves the model chart; the message names the scale.
    """
    model = resolve_model(cfg.model)
    c = build_connection(cfg, model)
    F = build_expansion(cfg, c, model) if functional is None else functional(c, model)
    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = dict(zip(cfg.scales, pool.map(lambda s: _row(cfg, model, c, F, s), cfg.scales)))
    else:
        results = {s: _row(cfg, model, c, F, s) for s in cfg.scales}
    rows = [results[s] for s in cfg.scales]
    report = ConvergenceReport(rows, declared_m=float(cfg.declared_m), tolerance=float(cfg.tolerance))
    notes = [f"fit window excludes the largest scale and rows with residual <= "
             f"{GUARD_FACTOR:g} x integrator residual"]
    if all(r.residual_norm <= EXACT_TOL for r in rows):
        report.verdict = "exact"
        notes.append(f"all residuals <= {EXACT_TOL:g}")
    else:
        try:
            slope, interval, window = fit_order(rows)
            report.fitted_order, report.interval, report.window = slope, interval, window
            report.verdict = "pass" if slope >= cfg.declared_m - cfg.tolerance else "fail"
        except InsufficientDataError as exc:
            notes.append(str(exc))
            report.verdict = "fail"
    report.notes = "; ".join(notes)
    if cfg.output:
        fmt = "csv" if str(cfg.output).endswith(".csv") else "json"
        emit_report(report, fmt, cfg.output)
    return report
