"""Command-line entry point: ``csmetric <subcommand> ...``.

Subcommands
-----------
generate    draw a seeded problem instance and save it as a directory of CSVs
gamp        run GAMP on a saved instance
estimate    apply a metric-optimal estimator to a saved GAMP result
limit       evaluate performance limits over a grid of parameters
roc         closed-form ROC table over a beta sweep
experiment  run a full seeded sweep (flags or an INI config file)
plot        redraw SVG charts from an experiment's CSV tables

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from ._quadrature import QuadratureError
from .estimators import estimate
from .gamp import GampConfig, GampDivergenceError, QuadratureConvergenceError, run_gamp
from .harness import ExperimentSpec, SpecError, run_experiment, write_plots
from .io import (channel_fields, channel_from_fields, fmt, load_gamp_result, load_instance, prior_fields,
                 prior_from_fields, read_table, save_estimate, save_gamp_result, save_instance, write_table)
from .limits import mmae_limit, mmsue_limit, mmue_scalar, mmwse_limit, roc_point
from .metrics import Power, parse_metric
from .model import make_instance
from .priors import GaussianSlab, SignalPrior, WeibullSlab

log = logging.getLogger("csmetric")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
FULL_SCALE = {"n": 10000, "trials": 100}


class _Invalid(Exception):
    pass


# -- shared argument groups ------------------------------------------------------

def _add_prior_args(p, defaults=True, slab=True):
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--p", type=float, default=d(0.03), help="probability a component is nonzero")
    if slab:
        p.add_argument("--slab", choices=("gaussian", "weibull"), default=d("gaussian"))
    p.add_argument("--slab-variance", type=float, default=d(1.0))
    p.add_argument("--slab-scale", type=float, default=d(1.0))
    p.add_argument("--slab-shape", type=float, default=d(0.5))


def _add_channel_args(p):
    p.add_argument("--channel", choices=("awgn", "poisson"), default="awgn")
    p.add_argument("--noise-var", type=float, default=3e-4)
    p.add_argument("--poisson-scale", type=float, default=100.0)


def _add_metric_args(p, default="absolute"):
    p.add_argument("--metric", default=default,
                   help="squared, absolute, support, wsupport(beta), power (with --power) or power(x)")
    p.add_argument("--power", type=float, default=None, help="exponent for --metric power")
    p.add_argument("--beta", type=float, default=None, help="weight for --metric wsupport")


def _metric(args):
    name = args.metric.strip().lower()
    if name == "power":
        if args.power is None:
            raise _Invalid("--metric power needs --power")
        return Power(args.power)
    if name in ("wsupport", "weighted_support") and args.beta is not None:
        return parse_metric(f"wsupport({args.beta})")
    return parse_metric(args.metric)


def _prior(args) -> SignalPrior:
    if args.slab == "weibull":
        return SignalPrior(args.p, WeibullSlab(args.slab_scale, args.slab_shape))
    return SignalPrior(args.p, GaussianSlab(args.slab_variance))


def _emit(header, columns, rows, out):
    if out:
        write_table(out, header, columns, rows)
        return
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])


# -- subcommands -----------------------------------------------------------------

def cmd_generate(args):
    prior = _prior(args)
    channel = channel_from_fields({"channel": args.channel, "noise_var": args.noise_var,
                                   "poisson_scale": args.poisson_scale})
    if args.m is None and args.ratio is None:
        raise _Invalid("give --m or --ratio")
    m = args.m if args.m is not None else int(round(args.ratio * args.n))
    if m < 1 or args.n < 1:
        raise _Invalid("n and m must be positive")
    inst = make_instance(prior, channel, args.n, m, args.seed)
    save_instance(inst, args.out)
    log.info("wrote instance n=%d m=%d to %s", args.n, m, args.out)
    return EXIT_OK


def cmd_gamp(args):
    inst = load_instance(args.instance)
    cfg = GampConfig(max_iterations=args.max_iterations, damping=args.damping,
                     mean_removal=not args.no_mean_removal)
    res = run_gamp(inst, cfg)
    extra = dict(prior_fields(inst.prior))
    extra.update(channel_fields(inst.channel))
    save_gamp_result(res, args.out, extra=extra)
    log.info("mu=%s after %d iterations", fmt(res.mu), res.iterations_run)
    return EXIT_OK


def cmd_estimate(args):
    head, _, _ = read_table(args.gamp_result)
    res = load_gamp_result(args.gamp_result)
    fields = {k: v for k, v in head.items() if k.startswith(("prior_", "slab"))}
    overrides = {"prior_p": args.p, "slab": args.slab, "slab_variance": args.slab_variance,
                 "slab_scale": args.slab_scale, "slab_shape": args.slab_shape}
    fields.update({k: v for k, v in overrides.items() if v is not None})
    if "prior_p" not in fields:
        raise _Invalid("prior unknown: the result file has no prior fields and --p was not given")
    prior = prior_from_fields(fields)
    metric = _metric(args)
    mu = args.mu if args.mu is not None else res.mu
    xhat = estimate(metric, prior, res.q, mu)
    save_estimate(xhat, args.out, metric.name, binary=metric.binary, extra={"mu": mu})
    return EXIT_OK


def cmd_limit(args):
    rows = []
    kind = args.kind
    for mu in args.mu:
        if kind == "mmsue":
            rows.append([kind, args.p, args.sigma2, mu, args.n, "", mmsue_limit(args.p, args.sigma2, mu, args.n)])
        elif kind == "mmwse":
            for beta in args.beta or [0.5]:
                rows.append([kind, args.p, args.sigma2, mu, args.n, beta,
                             mmwse_limit(args.p, args.sigma2, mu, args.n, beta)])
        elif kind == "mmae":
            prior = SignalPrior(args.p, GaussianSlab(args.sigma2))
            rows.append([kind, args.p, args.sigma2, mu, args.n, "", mmae_limit(prior, mu, args.n)])
        else:
            prior = SignalPrior(args.p, GaussianSlab(args.sigma2))
            metric = _metric(args)
            rows.append([f"mmue:{metric.name}", args.p, args.sigma2, mu, args.n, "",
                         args.n * mmue_scalar(prior, mu, metric)])
    _emit({}, ["kind", "p", "sigma2", "mu", "n", "beta", "limit"], rows, args.out)
    return EXIT_OK


def cmd_roc(args):
    betas = args.beta if args.beta else list(np.linspace(0.0, 1.0, args.points))
    rows = []
    for mu in args.mu:
        for beta in betas:
            fpr, fnr = roc_point(args.p, args.sigma2, mu, beta)
            rows.append([mu, float(beta), fpr, fnr, 1.0 - fnr])
    _emit({"p": args.p, "sigma2": args.sigma2}, ["mu", "beta", "fpr", "fnr", "tpr"], rows, args.out)
    return EXIT_OK


# experiment ------------------------------------------------------------------------

_LIST_FIELDS = {"ratios": float, "metrics": str, "betas": float, "mu_sweep": float}
_INT_FIELDS = {"n", "trials", "base_seed", "workers", "n_samples", "cosamp_k"}
_FLOAT_FIELDS = {"p", "slab_variance", "slab_scale", "slab_shape", "noise_var", "poisson_scale"}
_BOOL_FIELDS = {"cosamp", "limits", "plots"}
_GAMP_FIELDS = {"max_iterations": int, "damping": float, "variance_floor": float,
                "stop_tolerance": float, "mean_removal": bool, "retry_damping": float}


def _split(text):
    # metrics may contain commas inside parentheses, e.g. wsupport(0.3)
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if depth == 0 and (ch == "," or ch.isspace()):
            if cur:
                out.append(cur)
            cur = ""
        else:
            cur += ch
    if cur:
        out.append(cur)
    return out


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise _Invalid(f"not a boolean: {text!r}")


def _convert(key, value):
    try:
        if key in _LIST_FIELDS:
            items = _split(value) if isinstance(value, str) else list(value)
            return tuple(_LIST_FIELDS[key](v) for v in items)
        if key in _INT_FIELDS:
            return None if str(value).lower() == "none" else int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
        if key in _BOOL_FIELDS:
            return _bool(value)
    except ValueError as exc:
        raise _Invalid(f"bad value for {key}: {value!r}") from exc
    if key in ("scenario", "output_dir"):
        return str(value)
    raise _Invalid(f"unknown setting {key!r}")


def read_config(path) -> dict:
    """Flatten an INI file into ExperimentSpec keyword arguments.

    Keys from any section are accepted; keys from a ``[gamp]`` section (or
    prefixed ``gamp_`` elsewhere) configure GAMP.
    """
    cp = configparser.ConfigParser(interpolation=None)
    if not cp.read(path):
        raise _Invalid(f"cannot read config file {path}")
    spec, gamp = {}, {}
    for section in cp.sections():
        for key, value in cp.items(section):
            key = key.strip().replace("-", "_")
            if section.lower() == "gamp" or key.startswith("gamp_"):
                gkey = key.removeprefix("gamp_")
                if gkey not in _GAMP_FIELDS:
                    raise _Invalid(f"unknown gamp setting {gkey!r}")
                conv = _GAMP_FIELDS[gkey]
                try:
                    gamp[gkey] = _bool(value) if conv is bool else conv(value)
                except ValueError as exc:
                    raise _Invalid(f"bad value for gamp {gkey}: {value!r}") from exc
            else:
                if key == "m_over_n_sweep":
                    key = "ratios"
                elif key == "beta_sweep":
                    key = "betas"
                spec[key] = _convert(key, value)
    if gamp:
        spec["gamp"] = gamp
    return spec


def build_spec(args) -> ExperimentSpec:
    kwargs = read_config(args.config) if args.config else {}
    gamp = dict(kwargs.pop("gamp", {}))
    if args.full_scale:
        kwargs.update(FULL_SCALE)
    for key in ("scenario", "n", "trials", "base_seed", "workers", "n_samples", "output_dir", "cosamp_k",
                "p", "slab_variance", "slab_scale", "slab_shape", "noise_var", "poisson_scale"):
        v = getattr(args, key)
        if v is not None:
            kwargs[key] = v
    for key in ("ratios", "metrics", "betas", "mu_sweep"):
        v = getattr(args, key)
        if v is not None:
            kwargs[key] = _convert(key, " ".join(v))
    if args.power is not None:
        kwargs["metrics"] = tuple(kwargs.get("metrics", ())) + (Power(args.power),)
    for flag, key in (("no_cosamp", "cosamp"), ("no_limits", "limits"), ("no_plots", "plots")):
        if getattr(args, flag):
            kwargs[key] = False
    if args.max_iterations is not None:
        gamp["max_iterations"] = args.max_iterations
    if args.damping is not None:
        gamp["damping"] = args.damping
    try:
        kwargs["gamp"] = GampConfig(**gamp)
        spec = ExperimentSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise SpecError(str(exc)) from exc
    return spec.validate()


def cmd_experiment(args):
    spec = build_spec(args)
    result = run_experiment(spec)
    for f in result.files:
        log.info("wrote %s", f)
    if result.failures:
        log.error("%d trial(s) failed; see diagnostics.csv", result.failures)
        return EXIT_RUNTIME
    return EXIT_OK


def _typed(row):
    out = {}
    for k, v in row.items():
        try:
            out[k] = int(v) if k in ("m", "count", "trials") else float(v)
        except ValueError:
            out[k] = v
    return out


def cmd_plot(args):
    src = Path(args.input)
    out = Path(args.out or src)
    out.mkdir(parents=True, exist_ok=True)
    head, cols, rows = read_table(src / "aggregate.csv")
    if "estimator" not in cols:
        raise _Invalid(f"{src / 'aggregate.csv'} is not an experiment aggregate table")
    agg = [_typed(dict(zip(cols, r))) for r in rows]
    roc = []
    if (src / "roc_aggregate.csv").exists():
        _, rcols, rrows = read_table(src / "roc_aggregate.csv")
        roc = [_typed(dict(zip(rcols, r))) for r in rrows]
    names = head.get("metrics", "").split() or sorted({r["metric"] for r in agg})
    if not agg and not roc:
        raise _Invalid("nothing to plot")
    for f in write_plots(agg, roc, head.get("scenario", ""), names, out):
        log.info("wrote %s", f)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="csmetric", description="Metric-optimal compressed sensing estimation.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="draw a seeded problem instance")
    g.add_argument("--n", type=int, default=2000)
    g.add_argument("--m", type=int, default=None)
    g.add_argument("--ratio", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    _add_prior_args(g)
    _add_channel_args(g)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("gamp", parents=[common], help="run GAMP on a saved instance")
    r.add_argument("--instance", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--max-iterations", type=int, default=20)
    r.add_argument("--damping", type=float, default=1.0)
    r.add_argument("--no-mean-removal", action="store_true")
    r.set_defaults(func=cmd_gamp)

    e = sub.add_parser("estimate", parents=[common], help="metric-optimal estimate from a GAMP result")
    e.add_argument("--gamp-result", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--mu", type=float, default=None, help="override the scalar channel variance")
    _add_metric_args(e)
    _add_prior_args(e, defaults=False)
    e.set_defaults(func=cmd_estimate)

    lim = sub.add_parser("limit", parents=[common], help="performance limits on a parameter grid")
    lim.add_argument("--kind", choices=("mmae", "mmsue", "mmwse", "mmue"), default="mmsue")
    lim.add_argument("--p", type=float, default=0.03)
    lim.add_argument("--sigma2", type=float, default=1.0)
    lim.add_argument("--mu", type=float, nargs="+", required=True)
    lim.add_argument("--n", type=int, default=1)
    lim.add_argument("--beta", type=float, nargs="*", default=None)
    lim.add_argument("--metric", default="squared", help="metric for --kind mmue")
    lim.add_argument("--power", type=float, default=None)
    lim.add_argument("--out", default=None)
    lim.set_defaults(func=cmd_limit)

    roc = sub.add_parser("roc", parents=[common], help="closed-form ROC over a beta sweep")
    roc.add_argument("--p", type=float, default=0.03)
    roc.add_argument("--sigma2", type=float, default=1.0)
    roc.add_argument("--mu", type=float, nargs="+", required=True)
    roc.add_argument("--beta", type=float, nargs="*", default=None)
    roc.add_argument("--points", type=int, default=25)
    roc.add_argument("--out", default=None)
    roc.set_defaults(func=cmd_roc)

    x = sub.add_parser("experiment", parents=[common], help="run a seeded sweep")
    x.add_argument("--config", default=None, help="INI file with key = value settings")
    x.add_argument("--full-scale", action="store_true", help=f"use {FULL_SCALE}")
    x.add_argument("--scenario", default=None)
    x.add_argument("--n", type=int, default=None)
    x.add_argument("--trials", type=int, default=None)
    x.add_argument("--ratios", nargs="+", default=None)
    x.add_argument("--metrics", nargs="+", default=None)
    x.add_argument("--power", type=float, default=None, help="add Power(x) to the metrics")
    x.add_argument("--betas", nargs="+", default=None)
    x.add_argument("--mu-sweep", nargs="+", default=None)
    x.add_argument("--n-samples", type=int, default=None)
    x.add_argument("--base-seed", type=int, default=None)
    x.add_argument("--workers", type=int, default=None)
    x.add_argument("--output-dir", default=None)
    x.add_argument("--cosamp-k", type=int, default=None)
    x.add_argument("--no-cosamp", action="store_true")
    x.add_argument("--no-limits", action="store_true")
    x.add_argument("--no-plots", action="store_true")
    x.add_argument("--max-iterations", type=int, default=None)
    x.add_argument("--damping", type=float, default=None)
    _add_prior_args(x, defaults=False, slab=False)
    x.add_argument("--noise-var", type=float, default=None)
    x.add_argument("--poisson-scale", type=float, default=None)
    x.set_defaults(func=cmd_experiment)

    pl = sub.add_parser("plot", parents=[common], help="redraw charts from experiment tables")
    pl.add_argument("--input", required=True, help="experiment output directory")
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (GampDivergenceError, QuadratureError, QuadratureConvergenceError, FloatingPointError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    except (_Invalid, SpecError, ValueError, FileNotFoundError, KeyError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID
    except RuntimeError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
