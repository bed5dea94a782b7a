"""Plain-text serialisation.

Every file is CSV preceded by ``# key = value`` header lines. Floats are
written with ``repr`` so a round trip is exact and output is byte-stable.

Files
-----
instance directory
    ``signal.csv`` (``index,x``), ``measurements.csv`` (``index,w,y``) and
    ``phi.csv`` (one matrix row per line). Headers carry ``n``, ``m``,
    ``seed`` and the prior/channel parameters.
GAMP result
    ``index,q,x_mmse,x_var`` with ``mu``, ``iterations_run``,
    ``mu_trajectory`` (space separated), ``floor_hits``, ``damping``.
estimate
    ``index,xhat`` (``index,bhat`` for support metrics) with ``metric``.
"""
from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np

from .channels import AWGNChannel, PoissonChannel
from .gamp import ScalarChannelResult
from .model import ProblemInstance
from .priors import GaussianSlab, SignalPrior, WeibullSlab


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# -- parameter dictionaries ------------------------------------------------

def prior_fields(prior: SignalPrior) -> dict:
    if isinstance(prior.slab, GaussianSlab):
        return {"prior_p": prior.p, "slab": "gaussian", "slab_variance": prior.slab.variance}
    return {"prior_p": prior.p, "slab": "weibull", "slab_scale": prior.slab.scale, "slab_shape": prior.slab.shape}


def prior_from_fields(d) -> SignalPrior:
    p = float(d["prior_p"])
    slab = str(d.get("slab", "gaussian")).lower()
    if slab == "gaussian":
        return SignalPrior(p, GaussianSlab(float(d.get("slab_variance", 1.0))))
    if slab == "weibull":
        return SignalPrior(p, WeibullSlab(float(d.get("slab_scale", 1.0)), float(d.get("slab_shape", 0.5))))
    raise ValueError(f"unknown slab {slab!r}")


def channel_fields(channel) -> dict:
    if isinstance(channel, AWGNChannel):
        return {"channel": "awgn", "noise_var": channel.noise_var}
    return {"channel": "poisson", "poisson_scale": channel.scale}


def channel_from_fields(d):
    kind = str(d.get("channel", "awgn")).lower()
    if kind == "awgn":
        return AWGNChannel(float(d["noise_var"]))
    if kind == "poisson":
        return PoissonChannel(float(d.get("poisson_scale", 100.0)))
    raise ValueError(f"unknown channel {kind!r}")


# -- generic header + table --------------------------------------------------

def write_table(path, header: dict, columns: list, rows) -> None:
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k} = {fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    if columns:
        w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_table(path, has_columns=True):
    header = {}
    body = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                header[key.strip()] = val.strip()
            else:
                body.append(line)
    rows = list(csv.reader(body))
    columns = rows.pop(0) if has_columns and rows else []
    return header, columns, rows


# -- instances -----------------------------------------------------------------

def save_instance(inst: ProblemInstance, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    head = {"n": inst.n, "m": inst.m, "seed": inst.seed}
    head.update(prior_fields(inst.prior))
    head.update(channel_fields(inst.channel))
    write_table(d / "signal.csv", head, ["index", "x"], zip(range(inst.n), inst.x))
    write_table(d / "measurements.csv", head, ["index", "w", "y"], zip(range(inst.m), inst.w, inst.y))
    write_table(d / "phi.csv", head, [], inst.phi)


def load_instance(directory) -> ProblemInstance:
    d = Path(directory)
    head, _, sig = read_table(d / "signal.csv")
    _, _, meas = read_table(d / "measurements.csv")
    _, _, phi_rows = read_table(d / "phi.csv", has_columns=False)
    x = np.array([float(r[1]) for r in sig])
    w = np.array([float(r[1]) for r in meas])
    y = np.array([float(r[2]) for r in meas])
    phi = np.array([[float(v) for v in r] for r in phi_rows])
    if phi.shape != (int(head["m"]), int(head["n"])):
        raise ValueError(f"matrix shape {phi.shape} does not match header")
    return ProblemInstance(
        x=x, phi=phi, w=w, y=y,
        channel=channel_from_fields(head),
        prior=prior_from_fields(head),
        seed=head.get("seed"),
    )


# -- GAMP results -------------------------------------------------------------

def save_gamp_result(res: ScalarChannelResult, path, extra=None) -> None:
    head = {
        "mu": res.mu,
        "iterations_run": res.iterations_run,
        "mu_trajectory": " ".join(fmt(t) for t in res.mu_trajectory),
        "floor_hits": res.floor_hits,
        "damping": res.damping,
    }
    head.update(extra or {})
    rows = zip(range(res.q.size), res.q, res.x_mmse, res.x_var)
    write_table(path, head, ["index", "q", "x_mmse", "x_var"], rows)


def load_gamp_result(path) -> ScalarChannelResult:
    head, _, rows = read_table(path)
    arr = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(-1, 3)
    traj = tuple(float(t) for t in head.get("mu_trajectory", "").split())
    return ScalarChannelResult(
        q=arr[:, 0], mu=float(head["mu"]), x_mmse=arr[:, 1], x_var=arr[:, 2],
        iterations_run=int(head["iterations_run"]), mu_trajectory=traj,
        floor_hits=int(head.get("floor_hits", 0)), damping=float(head.get("damping", 1.0)),
    )


# -- estimates -------------------------------------------------------------------

def save_estimate(xhat, path, metric_name: str, binary=False, extra=None) -> None:
    head = {"metric": metric_name}
    head.update(extra or {})
    col = "bhat" if binary else "xhat"
    write_table(path, head, ["index", col], zip(range(len(xhat)), np.asarray(xhat, dtype=float)))


def load_estimate(path):
    head, _, rows = read_table(path)
    return head, np.array([float(r[1]) for r in rows])


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
