"""Seeded experiment sweeps: instances, GAMP, estimators, limits, tables, plots.

Outputs written to ``output_dir``:

``records.csv``
    one row per (ratio, trial, estimator, metric):
    ``scenario,n,m,ratio,trial,seed,estimator,metric,error,mu``.
    ``estimator`` is ``optimal``, ``posterior_mean``, ``cosamp`` or ``limit``
    (the matching performance limit evaluated at the trial's ``mu``).
``aggregate.csv``
    ``ratio,m,estimator,metric,count,mean,stderr,mean_mu``.
``diagnostics.csv``
    per trial: ``ratio,m,trial,seed,status,iterations,damping,floor_hits,mu,message``.
``roc.csv`` / ``roc_aggregate.csv``
    when a beta sweep is given: per trial false positive/negative counts and
    the matching closed-form rates; pooled rates per (ratio, beta).
``timings.csv``
    wall time per trial. Kept apart so the tables above are byte-stable.
``*.svg``
    one chart per metric, plus limit comparisons and ROC curves.

Seeds: trial ``t`` of ratio ``r`` uses ``numpy.random.SeedSequence([base_seed,
r, t])``; signal, matrix and noise use its three spawned children.
"""
from __future__ import annotations

import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import CosampConfig, cosamp
from .channels import AWGNChannel, PoissonChannel
from .estimators import estimate
from ._quadrature import QuadratureError
from .gamp import GampConfig, GampDivergenceError, QuadratureConvergenceError, run_gamp
from .io import fmt, write_table
from .limits import mmae_limit, mmsue_limit, mmwse_limit, roc_point
from .metrics import ErrorMetric, Power, Support, WeightedSupport, evaluate_error, parse_metric
from .model import make_instance, make_rng
from .plotting import Axes, Series, emit_plot
from .posterior import posterior_batch
from .priors import GaussianSlab, SignalPrior, WeibullSlab

SCENARIOS = ("gaussian_awgn", "weibull_poisson", "scalar_channel_direct")
ESTIMATOR_ORDER = ("optimal", "posterior_mean", "cosamp", "limit")

RECORD_COLUMNS = ["scenario", "n", "m", "ratio", "trial", "seed", "estimator", "metric", "error", "mu"]
AGGREGATE_COLUMNS = ["ratio", "m", "estimator", "metric", "count", "mean", "stderr", "mean_mu"]
DIAG_COLUMNS = ["ratio", "m", "trial", "seed", "status", "iterations", "damping", "floor_hits", "mu", "message"]
ROC_COLUMNS = [
    "ratio", "m", "trial", "seed", "beta", "false_pos", "false_neg", "n_zero", "n_nonzero",
    "fpr", "fnr", "fpr_limit", "fnr_limit",
]
ROC_AGG_COLUMNS = ["ratio", "m", "beta", "trials", "fpr", "fnr", "tpr", "fpr_limit", "fnr_limit", "tpr_limit", "mean_mu"]
DIRECT_COLUMNS = ["mu", "metric", "n_samples", "mean", "stderr", "limit", "fpr", "fpr_stderr", "fnr", "fnr_stderr", "fpr_limit", "fnr_limit"]


class SpecError(ValueError):
    """Invalid experiment settings."""


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str = "gaussian_awgn"
    n: int = 2000
    ratios: tuple = (0.2, 0.3, 0.4, 0.5)
    trials: int = 20
    metrics: tuple = ("absolute",)
    betas: tuple = ()
    base_seed: int = 0
    gamp: GampConfig = field(default_factory=GampConfig)
    cosamp: bool = True
    cosamp_k: int | None = None
    output_dir: str = "results"
    workers: int = 1
    limits: bool = True
    plots: bool = True
    # signal and channel parameters
    p: float = 0.03
    slab_variance: float = 1.0
    slab_scale: float = 1.0
    slab_shape: float = 0.5
    noise_var: float = 3e-4
    poisson_scale: float = 100.0
    # direct scalar-channel simulation
    mu_sweep: tuple = (1e-3, 1e-2, 1e-1)
    n_samples: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "metrics", tuple(parse_metric(m) if isinstance(m, str) else m for m in self.metrics))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "mu_sweep", tuple(float(m) for m in self.mu_sweep))

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise SpecError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if int(self.n) != self.n or self.n < 1:
            raise SpecError("n must be a positive integer")
        if int(self.trials) != self.trials or self.trials < 1:
            raise SpecError("trials must be >= 1")
        if not self.metrics and not self.betas:
            raise SpecError("at least one metric or beta is required")
        if self.scenario == "scalar_channel_direct":
            if not self.mu_sweep or any(not (m > 0 and math.isfinite(m)) for m in self.mu_sweep):
                raise SpecError("mu_sweep must be a nonempty list of positive values")
            if int(self.n_samples) != self.n_samples or self.n_samples < 1:
                raise SpecError("n_samples must be >= 1")
        else:
            if not self.ratios:
                raise SpecError("ratio sweep must be nonempty")
            if any(not (0.0 < r <= 1.0) for r in self.ratios):
                raise SpecError("ratios must lie in (0, 1]")
            if any(round(r * self.n) < 1 for r in self.ratios):
                raise SpecError("every ratio must give at least one measurement")
        if any(not (0.0 <= b <= 1.0) for b in self.betas):
            raise SpecError("betas must lie in [0, 1]")
        if int(self.workers) != self.workers or self.workers < 1:
            raise SpecError("workers must be >= 1")
        try:
            self.prior()
            self.channel()
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
        return self

    def prior(self) -> SignalPrior:
        if self.scenario == "weibull_poisson":
            return SignalPrior(self.p, WeibullSlab(self.slab_scale, self.slab_shape))
        return SignalPrior(self.p, GaussianSlab(self.slab_variance))

    def channel(self):
        if self.scenario == "weibull_poisson":
            return PoissonChannel(self.poisson_scale)
        return AWGNChannel(self.noise_var)

    def m_for(self, ratio):
        return int(round(ratio * self.n))


@dataclass(frozen=True)
class TrialRecord:
    scenario: str
    n: int
    m: int
    ratio: float
    trial: int
    seed: str
    estimator: str
    metric: str
    error: float
    mu: float
    wall_time: float = 0.0

    def row(self):
        return [self.scenario, self.n, self.m, self.ratio, self.trial, self.seed,
                self.estimator, self.metric, self.error, self.mu]


@dataclass
class ExperimentResult:
    records: list
    aggregate: list
    diagnostics: list
    roc: list = field(default_factory=list)
    roc_aggregate: list = field(default_factory=list)
    direct: list = field(default_factory=list)
    failures: int = 0
    files: list = field(default_factory=list)


def trial_seed(base_seed, ratio_idx, trial_idx):
    return np.random.SeedSequence([int(base_seed), int(ratio_idx), int(trial_idx)])


def _limit_for(metric: ErrorMetric, prior: SignalPrior, mu, n):
    """Performance limit matching ``metric`` or ``None`` if there is none."""
    gaussian = isinstance(prior.slab, GaussianSlab) and 0.0 < prior.p < 1.0
    if isinstance(metric, Power) and metric.exponent == 1:
        return mmae_limit(prior, mu, n)
    if isinstance(metric, WeightedSupport) and gaussian:
        return mmwse_limit(prior.p, prior.slab.variance, mu, n, metric.beta)
    if isinstance(metric, Support) and gaussian:
        return mmsue_limit(prior.p, prior.slab.variance, mu, n)
    return None


def _support_estimate(x):
    return (np.asarray(x) != 0).astype(float)


def _run_trial(spec: ExperimentSpec, ratio_idx: int, trial_idx: int):
    t0 = time.perf_counter()
    ratio = spec.ratios[ratio_idx]
    m = spec.m_for(ratio)
    prior, channel = spec.prior(), spec.channel()
    ss = trial_seed(spec.base_seed, ratio_idx, trial_idx)
    seed_label = f"{spec.base_seed}:{ratio_idx}:{trial_idx}"
    inst = make_instance(prior, channel, spec.n, m, ss)
    diag = dict(ratio=ratio, m=m, trial=trial_idx, seed=seed_label)
    try:
        res = run_gamp(inst, spec.gamp)
    except GampDivergenceError as exc:
        diag.update(status="diverged", iterations=len(exc.trajectory), damping=spec.gamp.retry_damping,
                    floor_hits=0, mu=exc.trajectory[-1] if exc.trajectory else math.nan, message=str(exc))
        return [], [], diag, time.perf_counter() - t0
    except (QuadratureConvergenceError, QuadratureError) as exc:
        diag.update(status="quadrature_error", iterations=0, damping=spec.gamp.damping,
                    floor_hits=0, mu=math.nan, message=str(exc))
        return [], [], diag, time.perf_counter() - t0
    mu = res.mu
    diag.update(status="ok", iterations=res.iterations_run, damping=res.damping,
                floor_hits=res.floor_hits, mu=mu, message="")

    cos = None
    if spec.cosamp and isinstance(channel, AWGNChannel):
        cfg = CosampConfig(spec.cosamp_k) if spec.cosamp_k else CosampConfig.for_prior(prior.p, spec.n)
        cos = cosamp(inst.y, inst.phi, cfg).x

    records = []

    def add(est, metric, err):
        records.append(TrialRecord(spec.scenario, spec.n, m, ratio, trial_idx, seed_label, est, metric.name, float(err), mu))

    post = posterior_batch(prior, res.q, mu)
    for metric in spec.metrics:
        xhat = estimate(metric, prior, res.q, mu, post=post)
        add("optimal", metric, evaluate_error(metric, xhat, inst.x))
        base = res.x_mmse
        if metric.binary:
            base = _support_estimate(base)
        add("posterior_mean", metric, evaluate_error(metric, base, inst.x))
        if cos is not None:
            add("cosamp", metric, evaluate_error(metric, _support_estimate(cos) if metric.binary else cos, inst.x))
        if spec.limits:
            lim = _limit_for(metric, prior, mu, spec.n)
            if lim is not None:
                add("limit", metric, lim)

    roc = []
    if spec.betas:
        nz = inst.x != 0
        gaussian = isinstance(prior.slab, GaussianSlab) and 0.0 < prior.p < 1.0
        for beta in spec.betas:
            b = estimate(WeightedSupport(beta), prior, res.q, mu, post=post) != 0
            fp = int(np.sum(b & ~nz))
            fn = int(np.sum(~b & nz))
            n0, n1 = int(np.sum(~nz)), int(np.sum(nz))
            fpr_l, fnr_l = roc_point(prior.p, prior.slab.variance, mu, beta) if gaussian else (math.nan, math.nan)
            roc.append(dict(ratio=ratio, m=m, trial=trial_idx, seed=seed_label, beta=beta,
                            false_pos=fp, false_neg=fn, n_zero=n0, n_nonzero=n1,
                            fpr=fp / n0 if n0 else math.nan, fnr=fn / n1 if n1 else math.nan,
                            fpr_limit=fpr_l, fnr_limit=fnr_l, mu=mu))
    return records, roc, diag, time.perf_counter() - t0


def _mean_stderr(vals):
    v = np.asarray(vals, dtype=float)
    mean = math.fsum(v.tolist()) / v.size
    if v.size < 2:
        return mean, 0.0
    var = math.fsum(((v - mean) ** 2).tolist()) / (v.size - 1)
    return mean, math.sqrt(var / v.size)


def aggregate_records(records, spec: ExperimentSpec):
    """Mean and standard error per (ratio, estimator, metric)."""
    groups = defaultdict(list)
    for r in records:
        groups[(r.ratio, r.m, r.estimator, r.metric)].append(r)
    metric_order = {m.name: i for i, m in enumerate(spec.metrics)}
    keys = sorted(groups, key=lambda k: (k[0], ESTIMATOR_ORDER.index(k[2]), metric_order.get(k[3], 99), k[3]))
    out = []
    for key in keys:
        rs = sorted(groups[key], key=lambda r: r.trial)
        mean, se = _mean_stderr([r.error for r in rs])
        mean_mu, _ = _mean_stderr([r.mu for r in rs])
        out.append(dict(ratio=key[0], m=key[1], estimator=key[2], metric=key[3], count=len(rs),
                        mean=mean, stderr=se, mean_mu=mean_mu))
    return out


def aggregate_roc(rows, spec: ExperimentSpec):
    """Pooled false positive/negative rates per (ratio, beta)."""
    groups = defaultdict(list)
    for r in rows:
        groups[(r["ratio"], r["m"], r["beta"])].append(r)
    out = []
    for key in sorted(groups):
        rs = sorted(groups[key], key=lambda r: r["trial"])
        fp = sum(r["false_pos"] for r in rs)
        fn = sum(r["false_neg"] for r in rs)
        n0 = sum(r["n_zero"] for r in rs)
        n1 = sum(r["n_nonzero"] for r in rs)
        fpr = fp / n0 if n0 else math.nan
        fnr = fn / n1 if n1 else math.nan
        mean_mu, _ = _mean_stderr([r["mu"] for r in rs])
        prior = spec.prior()
        if isinstance(prior.slab, GaussianSlab) and 0.0 < prior.p < 1.0:
            fl, nl = roc_point(prior.p, prior.slab.variance, mean_mu, key[2])
        else:
            fl, nl = math.nan, math.nan
        out.append(dict(ratio=key[0], m=key[1], beta=key[2], trials=len(rs), fpr=fpr, fnr=fnr, tpr=1.0 - fnr,
                        fpr_limit=fl, fnr_limit=nl, tpr_limit=1.0 - nl, mean_mu=mean_mu))
    return out


# -- direct scalar channel -----------------------------------------------------

def run_scalar_channel_direct(prior: SignalPrior, mu, n_samples, metrics, seed):
    """Simulate ``q = x + Normal(0, mu)`` directly and compare the empirical
    per-component error of each metric-optimal estimator with its limit.

    For weighted support metrics the false positive and false negative
    rates are reported as well, with binomial standard errors.
    """
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not (mu > 0 and math.isfinite(mu)):
        raise ValueError("mu must be finite and > 0")
    rng = make_rng(seed)
    x = prior.sample(rng, int(n_samples))
    q = x + math.sqrt(mu) * rng.standard_normal(int(n_samples))
    metrics = [parse_metric(m) if isinstance(m, str) else m for m in metrics]
    gaussian = isinstance(prior.slab, GaussianSlab) and 0.0 < prior.p < 1.0
    rows = []
    for metric in metrics:
        xhat = estimate(metric, prior, q, mu)
        d = metric.checked_distance(xhat, x)
        mean, se = _mean_stderr(d)
        lim = _limit_for(metric, prior, mu, 1)
        if lim is None and isinstance(metric, Power) and metric.exponent == 2 and isinstance(prior.slab, GaussianSlab) and prior.p == 1.0:
            s2 = prior.slab.variance
            lim = s2 * mu / (s2 + mu)
        row = dict(mu=mu, metric=metric.name, n_samples=int(n_samples), mean=mean, stderr=se,
                   limit=math.nan if lim is None else lim,
                   fpr=math.nan, fpr_stderr=math.nan, fnr=math.nan, fnr_stderr=math.nan,
                   fpr_limit=math.nan, fnr_limit=math.nan)
        if metric.binary:
            beta = metric.beta if isinstance(metric, WeightedSupport) else 0.5
            on = xhat != 0
            nz = x != 0
            n0, n1 = int(np.sum(~nz)), int(np.sum(nz))
            if n0:
                fpr = float(np.sum(on & ~nz)) / n0
                row.update(fpr=fpr, fpr_stderr=math.sqrt(max(fpr * (1 - fpr), 0.0) / n0))
            if n1:
                fnr = float(np.sum(~on & nz)) / n1
                row.update(fnr=fnr, fnr_stderr=math.sqrt(max(fnr * (1 - fnr), 0.0) / n1))
            if gaussian:
                fl, nl = roc_point(prior.p, prior.slab.variance, mu, beta)
                row.update(fpr_limit=fl, fnr_limit=nl)
        rows.append(row)
    return rows


# -- driver -------------------------------------------------------------------------

def _dict_rows(rows, columns):
    return [[r[c] for c in columns] for r in rows]


def run_experiment(spec: ExperimentSpec, write=True) -> ExperimentResult:
    """Run every (ratio, trial) job of ``spec`` and write the output tables."""
    spec.validate()
    out_dir = Path(spec.output_dir)
    if spec.scenario == "scalar_channel_direct":
        direct = []
        for i, mu in enumerate(spec.mu_sweep):
            seed = np.random.SeedSequence([int(spec.base_seed), i])
            direct.extend(run_scalar_channel_direct(spec.prior(), mu, spec.n_samples, spec.metrics, seed))
        result = ExperimentResult([], [], [], direct=direct)
        if write:
            out_dir.mkdir(parents=True, exist_ok=True)
            path = out_dir / "aggregate.csv"
            write_table(path, _header(spec), DIRECT_COLUMNS, _dict_rows(direct, DIRECT_COLUMNS))
            result.files.append(str(path))
        return result

    jobs = [(ri, ti) for ri in range(len(spec.ratios)) for ti in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outs = list(pool.map(_run_trial, [spec] * len(jobs), [j[0] for j in jobs], [j[1] for j in jobs]))
    else:
        outs = [_run_trial(spec, ri, ti) for ri, ti in jobs]

    records, roc, diags, timings = [], [], [], []
    for (ri, ti), (recs, rroc, diag, wall) in zip(jobs, outs):
        records.extend(replace(r, wall_time=wall) for r in recs)
        roc.extend(rroc)
        diags.append(diag)
        timings.append((spec.ratios[ri], ti, wall))
    metric_order = {m.name: i for i, m in enumerate(spec.metrics)}
    records.sort(key=lambda r: (r.ratio, r.trial, ESTIMATOR_ORDER.index(r.estimator), metric_order.get(r.metric, 99)))
    agg = aggregate_records(records, spec)
    roc_agg = aggregate_roc(roc, spec) if roc else []
    failures = sum(d["status"] != "ok" for d in diags)
    result = ExperimentResult(records, agg, diags, roc, roc_agg, failures=failures)
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        head = _header(spec)
        files = {
            "records.csv": (RECORD_COLUMNS, [r.row() for r in records]),
            "aggregate.csv": (AGGREGATE_COLUMNS, _dict_rows(agg, AGGREGATE_COLUMNS)),
            "diagnostics.csv": (DIAG_COLUMNS, _dict_rows(diags, DIAG_COLUMNS)),
        }
        if spec.betas:
            files["roc.csv"] = (ROC_COLUMNS, _dict_rows(roc, ROC_COLUMNS))
            files["roc_aggregate.csv"] = (ROC_AGG_COLUMNS, _dict_rows(roc_agg, ROC_AGG_COLUMNS))
        for name, (cols, rows) in files.items():
            write_table(out_dir / name, head, cols, rows)
            result.files.append(str(out_dir / name))
        write_table(out_dir / "timings.csv", {}, ["ratio", "trial", "wall_time"], timings)
        if spec.plots:
            names = [m.name for m in spec.metrics]
            result.files.extend(write_plots(agg, roc_agg, spec.scenario, names, out_dir))
    return result


def _header(spec: ExperimentSpec):
    head = {
        "scenario": spec.scenario,
        "n": spec.n,
        "trials": spec.trials,
        "base_seed": spec.base_seed,
        "prior": spec.prior().describe(),
        "channel": spec.channel().describe(),
        "metrics": " ".join(m.name for m in spec.metrics),
    }
    if spec.scenario != "scalar_channel_direct":
        head["ratios"] = " ".join(fmt(r) for r in spec.ratios)
        head["gamp_max_iterations"] = spec.gamp.max_iterations
        head["gamp_damping"] = spec.gamp.damping
    else:
        head["mu_sweep"] = " ".join(fmt(m) for m in spec.mu_sweep)
        head["n_samples"] = spec.n_samples
    if spec.betas:
        head["betas"] = " ".join(fmt(b) for b in spec.betas)
    return head


def _safe(name):
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in name).strip("_")


def write_plots(aggregate, roc_aggregate, scenario, metric_names, out_dir) -> list:
    """One chart per metric (estimators and limit vs ratio) and, with a beta
    sweep, the ROC curves. Rows are dicts as in ``aggregate.csv`` and
    ``roc_aggregate.csv``."""
    out_dir = Path(out_dir)
    files = []
    by_metric = defaultdict(lambda: defaultdict(list))
    for row in aggregate:
        by_metric[row["metric"]][row["estimator"]].append(row)
    for metric in metric_names:
        if metric not in by_metric:
            continue
        ax = Axes(title=f"{scenario}: {metric}", xlabel="M/N", ylabel="mean error", logy=True)
        for est in ESTIMATOR_ORDER:
            rows = by_metric[metric].get(est)
            if rows:
                ax.series.append(Series(est, [r["ratio"] for r in rows], [r["mean"] for r in rows],
                                        [r["stderr"] for r in rows]))
        if not any(v > 0 for s in ax.series for v in s.y):
            ax.logy = False
        path = out_dir / f"{_safe(metric)}.svg"
        path.write_text(emit_plot(ax))
        files.append(str(path))
    if roc_aggregate:
        ax = Axes(title=f"{scenario}: ROC", xlabel="false positive rate", ylabel="true positive rate")
        ratios = sorted({r["ratio"] for r in roc_aggregate})
        for ratio in ratios:
            rows = sorted((r for r in roc_aggregate if r["ratio"] == ratio), key=lambda r: -r["beta"])
            ax.series.append(Series(f"M/N={ratio:g}", [r["fpr"] for r in rows], [r["tpr"] for r in rows]))
            if not math.isnan(rows[0]["fpr_limit"]):
                ax.series.append(Series(f"M/N={ratio:g} limit", [r["fpr_limit"] for r in rows], [r["tpr_limit"] for r in rows]))
        path = out_dir / "roc.svg"
        path.write_text(emit_plot(ax))
        files.append(str(path))
    return files
