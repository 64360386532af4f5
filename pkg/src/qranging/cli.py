"""Command-line front end: ``qranging <task> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure
(any grid point that ended in an error row, or a convergence failure).
Diagnostics go to stderr; results go to ``--out`` or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .exceptions import ConfigError, QRangingError
from .photon_stats import DEFAULT_EPS, ChannelParams, coherent_slot_pmf, neg_binomial_pmf, poisson_pmf
from .sweep import (
    PARAMS,
    TASKS,
    config_from_dict,
    format_value,
    load_recipe,
    parse_config,
    recipe_names,
    render,
    run_sweep,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

# flag -> sweep parameter
_PARAM_FLAGS = {
    "mu": "--mu",
    "kappa": "--kappa",
    "mu_B": "--mu-b",
    "m": "--m",
    "L": "--copies",
    "R": "--tmsv-modes",
    "probe": "--probe",
    "rule": "--rule",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _values(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated values, got {text!r}")

    return parse


def _add_sweep_options(p, task):
    src = p.add_argument_group("configuration")
    src.add_argument("--config", metavar="FILE", help="JSON sweep configuration")
    src.add_argument("--recipe", choices=recipe_names(), help="bundled figure recipe")
    par = p.add_argument_group("parameters (comma-separated lists become sweep axes)")
    par.add_argument("--mu", type=_values(float), help="mean probe photons per copy")
    par.add_argument("--kappa", type=_values(float), help="target reflectance")
    par.add_argument("--mu-b", dest="mu_B", type=_values(float), help="mean background photons per slot")
    if task in ("single-shot", "montecarlo", "slope"):
        par.add_argument("--m", type=_values(int), help="number of time slots")
        par.add_argument("--copies", dest="L", type=_values(int), help="probe copies L")
    if task in ("montecarlo", "slope"):
        par.add_argument("--probe", type=_values(str), help="coherent or tmsv")
        par.add_argument("--rule", type=_values(str), help="max_total or idler_correlation")
        par.add_argument("--tmsv-modes", dest="R", type=_values(int), help="TMSV modes R per copy")
        par.add_argument("--trials", type=int, help="Monte Carlo trials per grid point")
        par.add_argument("--seed", type=int, help="64-bit seed")
        par.add_argument("--method", choices=("aggregate", "per_copy"), help="Monte Carlo sampler")
    par.add_argument("--eps", type=float, help="truncation tolerance")
    out = p.add_argument_group("output")
    out.add_argument("--out", metavar="FILE", help="write results here instead of stdout")
    out.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qranging", description="Photon-counting ranging: exponents, exact and simulated errors.")
    parser.add_argument("--version", action="version", version=f"qranging {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "exponent": "coherent ranging exponent and detection Chernoff information",
        "advantage": "quantum advantage of the TMSV probe over the coherent probe",
        "single-shot": "exact coherent error probability with max-count decisions",
        "montecarlo": "Monte Carlo error probability for either probe",
        "slope": "Monte Carlo normalized log error next to its asymptotic exponent",
    }
    for task in TASKS:
        _add_sweep_options(sub.add_parser(task, help=helps[task]), task)
    pmf = sub.add_parser("pmf", help="print a photon-count PMF as CSV (n, prob)")
    pmf.add_argument("dist", choices=("poisson", "negbin", "coherent-slot"))
    pmf.add_argument("--mu", type=float, required=True, help="mean photon number")
    pmf.add_argument("--tmsv-modes", dest="R", type=int, default=1, help="modes R (negbin)")
    pmf.add_argument("--kappa", type=float, default=1.0)
    pmf.add_argument("--mu-b", dest="mu_B", type=float, default=0.0)
    pmf.add_argument("--absent", action="store_true", help="coherent-slot without target")
    pmf.add_argument("--eps", type=float, default=DEFAULT_EPS)
    pmf.add_argument("--out", metavar="FILE")
    return parser


def _merge(raw, args):
    """Apply command-line parameters on top of a decoded configuration."""
    raw = dict(raw)
    axes = dict(raw.get("axes", {}))
    fixed = dict(raw.get("fixed", {}))
    for name in PARAMS:
        values = getattr(args, name, None)
        if values is None:
            continue
        if not values:
            raise UsageError(f"{_PARAM_FLAGS[name]} needs at least one value")
        axes.pop(name, None)
        fixed.pop(name, None)
        if len(values) == 1:
            fixed[name] = values[0]
        else:
            axes[name] = values
    if not axes and fixed:
        # a single point still needs one axis; promote the first parameter
        first = next(iter(fixed))
        axes[first] = [fixed.pop(first)]
    raw["axes"], raw["fixed"] = axes, fixed
    for key in ("trials", "seed", "eps", "method", "format"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if args.out is not None:
        raw["output_path"] = args.out
    return raw


def _load_base(args, task):
    if args.config and args.recipe:
        raise UsageError("use either --config or --recipe, not both")
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    elif args.recipe:
        cfg = load_recipe(args.recipe)
    else:
        return {"task": task}
    if cfg.task != task:
        raise UsageError(f"configuration is for task '{cfg.task}', not '{task}'")
    raw = cfg.canonical()
    raw["axes"] = {k: list(v) for k, v in raw["axes"].items()}
    raw["format"] = cfg.format
    if cfg.output_path:
        raw["output_path"] = cfg.output_path
    return raw


def _run_task(args, task):
    raw = _merge(_load_base(args, task), args)
    try:
        cfg = config_from_dict(raw)
    except ConfigError as exc:
        name = getattr(exc, "param", None)
        if name:
            raise UsageError(f"missing required parameter {_PARAM_FLAGS[name]} for '{task}'") from None
        raise
    record = run_sweep(cfg, write=True)
    if not cfg.output_path:
        sys.stdout.write(render(record, cfg.format))
    failed = record.error_rows()
    for row in failed:
        print(f"qranging: grid point failed: {row['error']}", file=sys.stderr)
    return EXIT_NUMERIC if failed else EXIT_OK


def _run_pmf(args):
    if args.dist == "poisson":
        pmf = poisson_pmf(args.mu, args.eps)
    elif args.dist == "negbin":
        pmf = neg_binomial_pmf(args.R, args.mu / args.R, args.eps)
    else:
        pmf = coherent_slot_pmf(args.mu, ChannelParams(args.kappa, args.mu_B), not args.absent, args.eps)
    lines = ["n,prob"] + [f"{n},{format_value(float(p))}" for n, p in enumerate(pmf.probs)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if args.command == "pmf":
            return _run_pmf(args)
        return _run_task(args, args.command)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"qranging: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"qranging: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qranging: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QRangingError, ArithmeticError, ValueError) as exc:
        print(f"qranging: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
