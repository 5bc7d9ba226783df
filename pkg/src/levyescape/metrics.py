"""Stochastic-basin areas and parameter sweeps."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError, LevyEscapeError
from .model import MorrisLecarDrift, describe_drift
from .noise import NoiseSpec
from .solver import (S_STAR, Region, SolverConfig, TargetStrip, assemble, solve_fep,
                     solve_mfet)

log = logging.getLogger(__name__)

SWEEP_HEADER = ["alpha", "sigma1", "sigma2", "fep_at_star", "mfet_at_star", "r_fep", "r_mfet", "status"]


@dataclass(frozen=True)
class ThresholdSpec:
    p_star: float = 0.8
    u_star: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.p_star < 1.0:
            raise ConfigError("metrics.p_star must lie in (0,1)")
        if not self.u_star > 0.0:
            raise ConfigError("metrics.u_star must be > 0")


def _area_fraction(values, threshold):
    values = np.asarray(values)
    return float(np.count_nonzero(values > threshold)) / values.size


def r_fep(field, p_star=0.8):
    """Area fraction of the region where FEP exceeds ``p_star`` (strictly).

    Every interior node stands for an equal share of the region.
    """
    return _area_fraction(getattr(field, "values", field), p_star)


def r_mfet(field, u_star=10.0):
    return _area_fraction(getattr(field, "values", field), u_star)


def turning_points(xs, ys):
    """x-locations where successive differences of ``ys`` change sign."""
    xs = np.asarray(xs, dtype=float)
    d = np.diff(np.asarray(ys, dtype=float))
    out = []
    for i in range(1, d.size):
        if d[i - 1] > 0 > d[i] or d[i - 1] < 0 < d[i]:
            out.append(float(xs[i]))
    return out


@dataclass(frozen=True)
class SweepSpec:
    """Parameter grid for a sweep.

    ``mode`` selects how the intensity axis is read:
    ``"diagonal"`` (sigma1 = sigma2 = sigma), ``"fix_sigma1"`` (sigma1 = ``fixed``,
    sigma2 over ``sigmas``) or ``"fix_sigma2"``. ``alpha = 2`` may be listed;
    it is solved on its own Brownian path and never interpolated.
    """

    alphas: tuple = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75)
    sigmas: tuple = (0.5,)
    mode: str = "diagonal"
    fixed: float | None = None
    point: tuple = S_STAR
    quantities: tuple = ("fep", "mfet")

    def __post_init__(self):
        if self.mode not in ("diagonal", "fix_sigma1", "fix_sigma2"):
            raise ConfigError("sweep.mode must be diagonal, fix_sigma1 or fix_sigma2")
        if self.mode != "diagonal" and self.fixed is None:
            raise ConfigError("sweep.fixed is required for ratio sweeps")
        for a in self.alphas:
            if not 0.0 < a <= 2.0:
                raise ConfigError(f"alpha must lie in (0,2], got {a}")
        for q in self.quantities:
            if q not in ("fep", "mfet"):
                raise ConfigError(f"unknown sweep quantity {q!r}")

    def tuples(self):
        out = []
        for a in self.alphas:
            for s in self.sigmas:
                if self.mode == "diagonal":
                    out.append((float(a), float(s), float(s)))
                elif self.mode == "fix_sigma1":
                    out.append((float(a), float(self.fixed), float(s)))
                else:
                    out.append((float(a), float(s), float(self.fixed)))
        return out


def dense_alphas(step=0.01):
    n = int(round((2.0 - 2 * step) / step)) + 1
    return tuple(round(step * (i + 1), 10) for i in range(n))


def _cache_key(payload):
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _atomic_write_json(path, obj):
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(obj, fh, sort_keys=True)
    os.replace(tmp, path)


def solve_point(drift, spec: NoiseSpec, region: Region, target: TargetStrip, cfg: SolverConfig,
                thresholds: ThresholdSpec, point, quantities):
    """Solve the requested problems for one parameter tuple; one row of a sweep table."""
    row = {"alpha": spec.alpha, "sigma1": spec.sigma1, "sigma2": spec.sigma2,
           "fep_at_star": None, "mfet_at_star": None, "r_fep": None, "r_mfet": None,
           "status": "ok"}
    try:
        op = assemble(drift, spec, region, cfg)
        if "fep" in quantities:
            p = solve_fep(drift, spec, region, target, cfg, operator=op)
            row["fep_at_star"] = float(p.at(*point))
            row["r_fep"] = r_fep(p, thresholds.p_star)
        if "mfet" in quantities:
            u = solve_mfet(drift, spec, region, cfg, operator=op)
            row["mfet_at_star"] = float(u.at(*point))
            row["r_mfet"] = r_mfet(u, thresholds.u_star)
    except LevyEscapeError as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def _worker(args):
    return solve_point(*args)


def sweep(spec: SweepSpec, drift=None, region: Region = Region(), target: TargetStrip = TargetStrip(),
          cfg: SolverConfig = SolverConfig(), thresholds: ThresholdSpec = ThresholdSpec(),
          cache_dir=None, workers=1):
    """Solve every tuple of ``spec``; rows come back in input order.

    With ``cache_dir`` each row is stored under a hash of all its inputs, so
    re-running a sweep only solves tuples not seen before.
    """
    drift = drift or MorrisLecarDrift()
    rows = [None] * len(spec.tuples())
    todo = []
    keys = []
    for i, (a, s1, s2) in enumerate(spec.tuples()):
        noise = NoiseSpec(a, s1, s2)
        payload = {"drift": describe_drift(drift), "noise": asdict(noise), "region": asdict(region),
                   "target": asdict(target), "solver": asdict(cfg), "thresholds": asdict(thresholds),
                   "point": list(spec.point), "quantities": sorted(spec.quantities)}
        key = _cache_key(payload)
        keys.append(key)
        path = os.path.join(cache_dir, key[:2], key + ".json") if cache_dir else None
        if path and os.path.exists(path):
            with open(path) as fh:
                rows[i] = json.load(fh)
            continue
        todo.append((i, (drift, noise, region, target, cfg, thresholds, tuple(spec.point),
                         tuple(spec.quantities))))
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_worker, [t[1] for t in todo]))
    else:
        results = [_worker(t[1]) for t in todo]
    for (i, _), row in zip(todo, results):
        rows[i] = row
        if cache_dir and row["status"] == "ok":
            _atomic_write_json(os.path.join(cache_dir, keys[i][:2], keys[i] + ".json"), row)
    return rows


def heatmap_matrix(rows, value, axis="ratio"):
    """Arrange sweep rows as a matrix over (intensity axis, alpha).

    ``axis`` is ``"ratio"`` (sigma2/sigma1), ``"sigma1"`` or ``"sigma2"``.
    Returns ``(alphas, ys, Z)`` with ``Z[i, j]`` at ``ys[i]``, ``alphas[j]``.
    """
    def y_of(r):
        if axis == "ratio":
            return r["sigma2"] / r["sigma1"]
        return r[axis]

    alphas = sorted({r["alpha"] for r in rows})
    ys = sorted({round(y_of(r), 12) for r in rows})
    Z = np.full((len(ys), len(alphas)), np.nan)
    for r in rows:
        v = r[value]
        if v is None:
            continue
        Z[ys.index(round(y_of(r), 12)), alphas.index(r["alpha"])] = v
    return np.array(alphas), np.array(ys), Z
