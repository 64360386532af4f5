"""Parameter sweeps over a Cartesian grid, written as CSV or JSON.

A sweep configuration is JSON text::

    {
      "task": "advantage",
      "axes": {"mu_B": [0.02, 0.2, 2],
               "mu": {"logspace": {"start": 0.01, "stop": 10, "per_decade": 50}}},
      "fixed": {"kappa": 0.1}
    }

``task`` is one of ``exponent``, ``advantage``, ``single-shot``,
``montecarlo`` and ``slope``.  Parameters (``mu``, ``kappa``, ``mu_B``,
``m``, ``L``, ``R``, ``probe``, ``rule``) come either from ``axes`` (a list
of values, or a ``logspace`` / ``linspace`` generator) or from ``fixed``,
never both.  The special axis ``case`` takes a list of objects, each setting
several parameters at once (e.g. paired ``mu`` and ``mu_B``); an optional
``label`` names the case in the output.  Remaining top-level keys are
``trials``, ``seed``, ``eps``, ``method``, ``output_path`` and ``format``.

Grid points are visited in the lexicographic order of the axes as listed.
The output starts with a provenance comment (version, seed, config hash)
and a separate comment holding the wall time, so two runs of the same
configuration differ only in that second line.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import __version__
from .coherent_exact import p_err_multicopy_coherent
from .exceptions import ConfigConflictError, ConfigError, QRangingError
from .info_measures import (
    CHERNOFF_ALPHA_MIN,
    chernoff_information,
    coherent_slot_laws,
    tail_eps_for,
    quantum_advantage,
    xi_coherent_closed,
    xi_quantum,
)
from .photon_stats import DEFAULT_EPS, ChannelParams, TmsvProbe
from .ranging_sim import (
    CoherentProbe,
    DecisionRule,
    Scenario,
    mc_error_probability,
    resolve_workers,
)

TASKS = ("exponent", "advantage", "single-shot", "montecarlo", "slope")
PARAMS = ("mu", "kappa", "mu_B", "m", "L", "probe", "R", "rule")
CONTROL_KEYS = ("task", "axes", "fixed", "trials", "seed", "eps", "method", "output_path", "format")
FORMATS = ("csv", "json")
CASE_AXIS = "case"

_FLOAT_PARAMS = ("mu", "kappa", "mu_B")
_INT_PARAMS = ("m", "L", "R")
_CHOICES = {"probe": ("coherent", "tmsv"), "rule": tuple(r.value for r in DecisionRule)}

_TASK_PARAMS = {
    "exponent": ("mu", "kappa", "mu_B"),
    "advantage": ("mu", "kappa", "mu_B"),
    "single-shot": ("mu", "kappa", "mu_B", "m", "L"),
    "montecarlo": PARAMS,
    "slope": PARAMS,
}
_REQUIRED = ("mu", "kappa", "mu_B")
_DEFAULTS = {"m": 2, "L": 1, "probe": "coherent"}

_MC_COLUMNS = ("p_hat", "std_err", "ci95_low", "ci95_high", "errors", "trials")
RESULT_COLUMNS = {
    "exponent": ("xi_coh_nats", "xi_detect_coh_nats", "alpha_star"),
    "advantage": ("xi_coh_nats", "xi_q_nats", "advantage_q", "q_emp", "alpha_star", "r_used"),
    "single-shot": ("p_err",),
    "montecarlo": _MC_COLUMNS,
    "slope": _MC_COLUMNS + ("norm_log_err_nats", "xi_ref_nats", "needs_more_trials"),
}


def _line_of(text, token):
    """1-based line of the first occurrence of ``"token"`` in ``text``, or None."""
    if text is None:
        return None
    pos = text.find(f'"{token}"')
    return None if pos < 0 else text.count("\n", 0, pos) + 1


def _fail(text, path, message, cls=ConfigError, token=None):
    line = _line_of(text, token or path.rsplit(".", 1)[-1].split("[", 1)[0])
    where = f"line {line}: " if line else ""
    err = cls(f"{where}field '{path}': {message}")
    err.field = path
    err.line = line
    return err


@dataclass(frozen=True)
class SweepConfig:
    """Validated sweep: named axes, fixed parameters and run controls."""

    task: str
    axes: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    trials: int = 100_000
    seed: int = 0
    eps: float = DEFAULT_EPS
    method: str = "aggregate"
    output_path: str | None = None
    format: str = "csv"

    def canonical(self) -> dict:
        """Everything that determines the results, in a JSON-ready form."""
        return {
            "task": self.task,
            "axes": {k: list(v) for k, v in self.axes.items()},
            "fixed": dict(self.fixed),
            "trials": self.trials,
            "seed": self.seed,
            "eps": self.eps,
            "method": self.method,
        }

    def sha256(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def points(self):
        """Grid points as parameter dicts, in lexicographic axis order."""
        names = list(self.axes)
        for combo in itertools.product(*(self.axes[n] for n in names)):
            point = dict(self.fixed)
            for name, value in zip(names, combo):
                if name == CASE_AXIS:
                    point.update({k: v for k, v in value.items() if k != "label"})
                    point[CASE_AXIS] = value.get("label", str(self.axes[name].index(value)))
                else:
                    point[name] = value
            yield point


@dataclass
class RunRecord:
    """Outcome of one sweep: provenance plus one row per grid point."""

    config: dict
    version: str
    seed: int
    config_sha256: str
    wall_time_s: float
    columns: list
    rows: list

    def error_rows(self):
        return [r for r in self.rows if r.get("error")]


# -- parsing -----------------------------------------------------------------


def _tidy(v):
    # 0.15000000000000002 -> 0.15; generated grids need no more digits
    return float(f"{v:.12g}")


def _expand_axis(text, name, spec):
    if isinstance(spec, list):
        if not spec:
            raise _fail(text, f"axes.{name}", "axis must not be empty")
        return spec
    if isinstance(spec, dict) and len(spec) == 1:
        kind, args = next(iter(spec.items()))
        if kind == "logspace" and isinstance(args, dict) and set(args) == {"start", "stop", "per_decade"}:
            start, stop, per = args["start"], args["stop"], args["per_decade"]
            if not (start > 0 and stop > 0 and isinstance(per, int) and per > 0):
                raise _fail(text, f"axes.{name}.logspace", "needs start, stop > 0 and integer per_decade > 0")
            lo, hi = math.log10(start), math.log10(stop)
            n = int(round(abs(hi - lo) * per)) + 1
            return [_tidy(v) for v in np.logspace(lo, hi, n)]
        if kind == "linspace" and isinstance(args, dict) and set(args) == {"start", "stop", "num"}:
            if not (isinstance(args["num"], int) and args["num"] > 0):
                raise _fail(text, f"axes.{name}.linspace", "num must be a positive integer")
            return [_tidy(v) for v in np.linspace(args["start"], args["stop"], args["num"])]
    raise _fail(
        text,
        f"axes.{name}",
        "expected a list or {\"logspace\": {start, stop, per_decade}} or {\"linspace\": {start, stop, num}}",
    )


def _check_value(text, path, name, value):
    if name in _FLOAT_PARAMS:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        want = "a number"
    elif name in _INT_PARAMS:
        ok = isinstance(value, int) and not isinstance(value, bool)
        want = "an integer"
    else:
        ok = value in _CHOICES[name]
        want = "one of " + ", ".join(_CHOICES[name])
    if not ok:
        raise _fail(text, path, f"{value!r} is not {want}", token=name)
    return float(value) if name in _FLOAT_PARAMS else value


def config_from_dict(raw: dict, text: str | None = None) -> SweepConfig:
    """Validate a decoded configuration; ``text`` (if given) locates errors by line."""
    if not isinstance(raw, dict):
        raise _fail(text, "<root>", "configuration must be a JSON object")
    for key in raw:
        if key not in CONTROL_KEYS:
            raise _fail(text, key, "unknown key")
    task = raw.get("task")
    if task not in TASKS:
        raise _fail(text, "task", f"must be one of {', '.join(TASKS)}, got {task!r}")

    axes_raw = raw.get("axes", {})
    fixed_raw = raw.get("fixed", {})
    for section, body in (("axes", axes_raw), ("fixed", fixed_raw)):
        if not isinstance(body, dict):
            raise _fail(text, section, "must be a JSON object")

    sources = {}

    def claim(name, where):
        if name in sources:
            raise _fail(
                text,
                f"{where}.{name}",
                f"parameter already set in {sources[name]}",
                cls=ConfigConflictError,
                token=name,
            )
        sources[name] = where

    axes = {}
    for name, spec in axes_raw.items():
        if name == CASE_AXIS:
            if not isinstance(spec, list) or not spec or not all(isinstance(c, dict) for c in spec):
                raise _fail(text, "axes.case", "must be a non-empty list of objects")
            keys = {k for c in spec for k in c if k != "label"}
            for c in spec:
                if set(c) - {"label"} != keys:
                    raise _fail(text, "axes.case", "every case must set the same parameters")
                for k, v in c.items():
                    if k == "label":
                        continue
                    if k not in PARAMS:
                        raise _fail(text, f"axes.case.{k}", "unknown key")
                    c[k] = _check_value(text, f"axes.case.{k}", k, v)
            for k in sorted(keys):
                claim(k, "axes.case")
            axes[name] = tuple(spec)
            continue
        if name not in PARAMS:
            raise _fail(text, f"axes.{name}", "unknown key")
        claim(name, "axes")
        values = _expand_axis(text, name, spec)
        axes[name] = tuple(_check_value(text, f"axes.{name}", name, v) for v in values)
    fixed = {}
    for name, value in fixed_raw.items():
        if name not in PARAMS:
            raise _fail(text, f"fixed.{name}", "unknown key")
        claim(name, "fixed")
        fixed[name] = _check_value(text, f"fixed.{name}", name, value)
    if not axes:
        raise _fail(text, "axes", "at least one axis is required")

    for name in _REQUIRED:
        if name not in sources:
            err = _fail(text, name, f"required parameter '{name}' is missing from axes and fixed")
            err.param = name
            raise err
    unused = set(sources) - set(_TASK_PARAMS[task])
    if unused:
        name = sorted(unused)[0]
        raise _fail(text, name, f"parameter not used by task '{task}'")

    trials = raw.get("trials", 100_000)
    seed = raw.get("seed", 0)
    eps = raw.get("eps", DEFAULT_EPS)
    method = raw.get("method", "aggregate")
    fmt = raw.get("format", "csv")
    out = raw.get("output_path")
    if not (isinstance(trials, int) and not isinstance(trials, bool) and trials >= 1):
        raise _fail(text, "trials", "must be an integer >= 1")
    if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64):
        raise _fail(text, "seed", "must be an integer in [0, 2**64)")
    if not (isinstance(eps, (int, float)) and 0 < eps < 1):
        raise _fail(text, "eps", "must lie in (0, 1)")
    if method not in ("aggregate", "per_copy"):
        raise _fail(text, "method", "must be 'aggregate' or 'per_copy'")
    if fmt not in FORMATS:
        raise _fail(text, "format", f"must be one of {', '.join(FORMATS)}")
    if out is not None and not isinstance(out, str):
        raise _fail(text, "output_path", "must be a string")
    return SweepConfig(task, axes, fixed, trials, seed, float(eps), method, out, fmt)


def parse_config(text: str) -> SweepConfig:
    """Parse and validate JSON configuration text.

    Raises :class:`ConfigError` (or :class:`ConfigConflictError`) with the
    offending field and, where it can be located, the line number.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        err = ConfigError(f"line {exc.lineno}, column {exc.colno}: invalid JSON: {exc.msg}")
        err.field, err.line = None, exc.lineno
        raise err from None
    return config_from_dict(raw, text)


def recipe_names() -> list[str]:
    files = resources.files("qranging").joinpath("recipes").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def load_recipe(name: str) -> SweepConfig:
    """Bundled figure-reproduction configuration by name (e.g. ``fig2a``)."""
    if name not in recipe_names():
        raise ConfigError(f"unknown recipe {name!r}; available: {', '.join(recipe_names())}")
    text = resources.files("qranging").joinpath("recipes", f"{name}.json").read_text("utf-8")
    return parse_config(text)


# -- evaluation --------------------------------------------------------------


def _with_defaults(task, point):
    full = dict(point)
    if task in ("single-shot", "montecarlo", "slope"):
        for k, v in _DEFAULTS.items():
            if k in _TASK_PARAMS[task]:
                full.setdefault(k, v)
    if task in ("montecarlo", "slope"):
        tmsv = full["probe"] == "tmsv"
        full.setdefault("rule", "idler_correlation" if tmsv else "max_total")
        full.setdefault("R", max(1000, math.ceil(1000 * full["mu"])) if tmsv else "")
        if not tmsv and full["R"] != "":
            raise ConfigError("R applies to the tmsv probe only")
    return full


def param_columns(cfg: SweepConfig) -> list[str]:
    cols = [CASE_AXIS] if CASE_AXIS in cfg.axes else []
    return cols + list(_TASK_PARAMS[cfg.task])


def scenario_for(p: dict) -> Scenario:
    """Monte Carlo scenario of one (default-completed) grid point."""
    ch = ChannelParams(p["kappa"], p["mu_B"])
    probe = TmsvProbe(p["mu"], p["R"]) if p["probe"] == "tmsv" else CoherentProbe(p["mu"])
    return Scenario(p["m"], p["L"], probe, ch)


def evaluate_point(task: str, p: dict, trials: int, seed: int, eps: float, method: str) -> dict:
    """Result columns of one grid point; library errors propagate."""
    if task == "exponent":
        ch = ChannelParams(p["kappa"], p["mu_B"])
        xi_td, alpha = chernoff_information(
            *coherent_slot_laws(p["mu"], ch, tail_eps_for(CHERNOFF_ALPHA_MIN, eps))
        )
        return {
            "xi_coh_nats": xi_coherent_closed(ch, p["mu"]),
            "xi_detect_coh_nats": xi_td,
            "alpha_star": alpha,
        }
    if task == "advantage":
        rep = quantum_advantage(ChannelParams(p["kappa"], p["mu_B"]), p["mu"], eps)
        return {
            "xi_coh_nats": rep.xi_coh,
            "xi_q_nats": rep.xi_q,
            "advantage_q": rep.advantage_q,
            "q_emp": rep.q_emp,
            "alpha_star": rep.alpha_star,
            "r_used": rep.r_used,
        }
    if task == "single-shot":
        return {"p_err": p_err_multicopy_coherent(p["m"], p["kappa"], p["mu"], p["mu_B"], p["L"])}
    s = scenario_for(p)
    est = mc_error_probability(s, p["rule"], trials, seed, method=method)
    out = {
        "p_hat": est.p_hat,
        "std_err": est.std_err,
        "ci95_low": est.ci95_low,
        "ci95_high": est.ci95_high,
        "errors": est.errors,
        "trials": est.trials,
    }
    if task == "slope":
        if s.is_tmsv:
            xi_ref, _ = xi_quantum(p["mu"], s.channel, eps)
        else:
            xi_ref = xi_coherent_closed(s.channel, p["mu"])
        zero = est.errors == 0
        out["norm_log_err_nats"] = math.inf if zero else -math.log(est.p_hat) / p["L"]
        out["xi_ref_nats"] = xi_ref
        out["needs_more_trials"] = zero
    return out


def _run_point(args):
    task, point, trials, seed, eps, method = args
    try:
        p = _with_defaults(task, point)
    except (QRangingError, KeyError) as exc:
        return dict(point), {}, f"{type(exc).__name__}: {exc}"
    try:
        return p, evaluate_point(task, p, trials, seed, eps, method), ""
    except (QRangingError, ArithmeticError, ValueError) as exc:
        return p, {}, f"{type(exc).__name__}: {exc}"


def run_sweep(cfg: SweepConfig, workers: int | None = None, write: bool = True) -> RunRecord:
    """Evaluate ``cfg.task`` on every grid point.

    Exponent and exact tasks spread grid points over a process pool; Monte
    Carlo tasks run points one after another and parallelize trials
    instead.  A failing point becomes a row whose ``error`` column says why.
    When ``cfg.output_path`` is set (and ``write``), the file is written in
    ``cfg.format``.
    """
    start = time.perf_counter()
    jobs = [(cfg.task, pt, cfg.trials, cfg.seed, cfg.eps, cfg.method) for pt in cfg.points()]
    n_workers = min(resolve_workers(workers), len(jobs))
    if cfg.task in ("montecarlo", "slope") or n_workers == 1:
        results = list(map(_run_point, jobs))
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_point, jobs, chunksize=max(1, len(jobs) // (4 * n_workers))))
    columns = param_columns(cfg) + list(RESULT_COLUMNS[cfg.task]) + ["error"]
    rows = []
    for params, values, error in results:
        row = {c: params.get(c, "") for c in param_columns(cfg)}
        row.update({c: values.get(c, "") for c in RESULT_COLUMNS[cfg.task]})
        row["error"] = error
        rows.append(row)
    record = RunRecord(
        config=cfg.canonical(),
        version=__version__,
        seed=cfg.seed,
        config_sha256=cfg.sha256(),
        wall_time_s=time.perf_counter() - start,
        columns=columns,
        rows=rows,
    )
    if write and cfg.output_path:
        with open(cfg.output_path, "w", newline="", encoding="utf-8") as fh:
            write_record(record, fh, cfg.format)
    return record


# -- output ------------------------------------------------------------------


def format_value(v) -> str:
    """Shortest round-trip text; exponent notation below 1e-4 in magnitude."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def provenance_line(record: RunRecord) -> str:
    return (
        f"# qranging {record.version} task={record.config['task']} "
        f"seed={record.seed} config_sha256={record.config_sha256}"
    )


def wall_time_line(record: RunRecord) -> str:
    return f"# wall_time_s={record.wall_time_s:.3f}"


def write_csv(record: RunRecord, fh) -> None:
    fh.write(provenance_line(record) + "\n")
    fh.write(wall_time_line(record) + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(record.columns)
    for row in record.rows:
        writer.writerow([format_value(row[c]) for c in record.columns])


def _json_value(v):
    if isinstance(v, (float, np.floating)) and not math.isfinite(v):
        return format_value(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return None if v == "" else v


def write_json(record: RunRecord, fh) -> None:
    doc = {
        "version": record.version,
        "seed": record.seed,
        "config_sha256": record.config_sha256,
        "config": record.config,
        "wall_time_s": record.wall_time_s,
        "rows": [{c: _json_value(row[c]) for c in record.columns} for row in record.rows],
    }
    json.dump(doc, fh, indent=1, allow_nan=False)
    fh.write("\n")


def write_record(record: RunRecord, fh, fmt: str = "csv") -> None:
    if fmt == "json":
        write_json(record, fh)
    else:
        write_csv(record, fh)


def render(record: RunRecord, fmt: str = "csv") -> str:
    buf = io.StringIO()
    write_record(record, buf, fmt)
    return buf.getvalue()


def read_csv_rows(text: str) -> list[dict]:
    """Rows of a sweep CSV as string dicts, skipping comment lines."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
