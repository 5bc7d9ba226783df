"""Direct simulation of the stochastic system: independent FEP / MFET estimates.

Euler scheme with exit checked after every step. For Brownian noise a
Brownian-bridge test also catches edge crossings between steps, which removes
the O(sqrt(dt)) late-exit bias of discrete monitoring. Each path draws its noise
from its own Philox address range ``(step, path_id, channel)``, so outcomes do
not depend on how paths are split across workers.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, HorizonTooShort
from .noise import NoiseSpec
from .solver import Region, TargetStrip

log = logging.getLogger(__name__)

Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_max: float = 1e4
    n_paths: int = 100_000
    seed: int = 20190101
    antithetic: bool = False
    validate: bool = True
    max_censored: float = 0.01
    workers: int = 1
    # Brownian-bridge exit test between steps (alpha = 2 only)
    bridge: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("mc.dt must be > 0")
        if self.t_max < 100 * self.dt:
            raise ConfigError("mc.t_max must be at least 100 * mc.dt")
        if self.n_paths < 100:
            raise ConfigError("mc.n_paths must be >= 100")
        if self.antithetic and self.n_paths % 2:
            raise ConfigError("mc.n_paths must be even with antithetic sampling")
        if self.workers < 1:
            raise ConfigError("mc.workers must be >= 1")

    @property
    def n_steps(self):
        return int(round(self.t_max / self.dt))


@dataclass
class PathOutcomes:
    """Per-path results, indexed by path id."""

    path_id: np.ndarray
    exit_time: np.ndarray
    exit_v: np.ndarray
    exit_w: np.ndarray
    reached_E: np.ndarray
    censored: np.ndarray
    nonfinite: np.ndarray

    def __len__(self):
        return self.path_id.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["path_id", "exit_time", "exit_v", "exit_w", "reached_E", "censored"])
            for row in zip(self.path_id, self.exit_time, self.exit_v, self.exit_w,
                           self.reached_E, self.censored):
                wr.writerow([int(row[0]), f"{row[1]:.6g}", f"{row[2]:.6g}", f"{row[3]:.6g}",
                             int(row[4]), int(row[5])])


@dataclass(frozen=True)
class PathEstimate:
    mean: float
    half_width: float
    n_paths: int
    censored_fraction: float
    nonfinite: int = 0

    @property
    def interval(self):
        return self.mean - self.half_width, self.mean + self.half_width

    def contains(self, x):
        lo, hi = self.interval
        return lo <= x <= hi

    def summary(self, label="estimate"):
        return (f"{label} = {self.mean:.6g} +/- {self.half_width:.3g} (95%), "
                f"paths = {self.n_paths}, censored = {self.censored_fraction:.4%}")


def step(state, drift, spec: NoiseSpec, dt, seed, path_id=0, index=0):
    """One Euler step of the system from ``state``; noise addressed by (index, path_id)."""
    v, w = float(state[0]), float(state[1])
    f1, f2 = drift(np.array([v]), np.array([w]))
    ctr = np.array([index], dtype=np.uint64)
    if spec.brownian:
        scale = np.sqrt(dt)
    else:
        scale = dt ** (1.0 / spec.alpha)
    v_new = v + float(f1[0]) * dt
    w_new = w + float(f2[0]) * dt
    if spec.sigma1:
        v_new += spec.sigma1 * scale * float(kernels.noise_draws(spec.alpha, seed, ctr, path_id, 0)[0])
    if spec.sigma2:
        w_new += spec.sigma2 * scale * float(kernels.noise_draws(spec.alpha, seed, ctr, path_id, 1)[0])
    return v_new, w_new


def simulate(start, region: Region, drift, spec: NoiseSpec, cfg: SimConfig = SimConfig(),
             target: TargetStrip | None = None, backend=None, path_ids=None):
    """Run every path to its first exit from ``region`` (or the horizon)."""
    ids = np.arange(cfg.n_paths, dtype=np.int64) if path_ids is None else np.asarray(path_ids, np.int64)
    chunks = np.array_split(ids, cfg.workers)

    def run(chunk):
        return kernels.simulate_paths(drift, start, region.box, spec.alpha, spec.sigma1,
                                      spec.sigma2, cfg.dt, cfg.n_steps, cfg.seed, chunk,
                                      cfg.antithetic, cfg.bridge, backend=backend)

    if cfg.workers == 1:
        parts = [run(ids)]
    else:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(run, chunks))
    steps, v, w, status = (np.concatenate(x) for x in zip(*parts))
    censored = status == 0
    nonfinite = status == 2
    if target is None:
        target = TargetStrip()
    reached = (status == 1) & target.contains(v, w, region)
    if nonfinite.any():
        log.warning("%d paths produced non-finite states and were dropped", nonfinite.sum())
    return PathOutcomes(ids, steps * cfg.dt, v, w, reached, censored, nonfinite)


def _pairwise_mean_std(x, antithetic):
    if antithetic and x.size % 2 == 0 and x.size:
        x = 0.5 * (x[0::2] + x[1::2])
    n = x.size
    if n == 0:
        return np.nan, np.nan, 0
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if n > 1 else 0.0
    return mean, std, n


def _check_censoring(frac, cfg):
    if cfg.validate and frac > cfg.max_censored:
        raise HorizonTooShort(f"{frac:.2%} of paths still inside at t_max = {cfg.t_max}",
                              censored_fraction=frac)


def estimate_fep(start, region: Region = Region(), target: TargetStrip = TargetStrip(), drift=None,
                 spec: NoiseSpec = NoiseSpec(), cfg: SimConfig = SimConfig(), backend=None,
                 outcomes=None):
    """Fraction of uncensored paths whose first exit lands in the target strip."""
    v0, w0 = start
    if not region.contains(v0, w0):
        val = 1.0 if target.contains(v0, w0, region) else 0.0
        return PathEstimate(val, 0.0, cfg.n_paths, 0.0)
    out = outcomes or simulate(start, region, drift, spec, cfg, target, backend)
    frac = float(out.censored.mean())
    _check_censoring(frac, cfg)
    keep = ~(out.censored | out.nonfinite)
    hits = out.reached_E[keep].astype(float)
    if cfg.antithetic and keep.all():
        mean, std, n = _pairwise_mean_std(hits, True)
        hw = Z95 * std / np.sqrt(n)
    else:
        n = hits.size
        mean = float(hits.mean())
        hw = Z95 * np.sqrt(mean * (1 - mean) / n)
    return PathEstimate(mean, float(hw), int(keep.sum()), frac, int(out.nonfinite.sum()))


def estimate_mfet(start, region: Region = Region(), drift=None, spec: NoiseSpec = NoiseSpec(),
                  cfg: SimConfig = SimConfig(), backend=None, outcomes=None):
    """Mean exit time with a normal-approximation 95% interval."""
    v0, w0 = start
    if not region.contains(v0, w0):
        return PathEstimate(0.0, 0.0, cfg.n_paths, 0.0)
    out = outcomes or simulate(start, region, drift, spec, cfg, None, backend)
    frac = float(out.censored.mean())
    # censored exit times would bias the mean low; refuse rather than truncate
    if frac > cfg.max_censored:
        raise HorizonTooShort(f"{frac:.2%} of paths still inside at t_max = {cfg.t_max}",
                              censored_fraction=frac)
    keep = ~(out.censored | out.nonfinite)
    times = out.exit_time[keep]
    mean, std, n = _pairwise_mean_std(times, cfg.antithetic and keep.all())
    return PathEstimate(mean, float(Z95 * std / np.sqrt(n)), int(keep.sum()), frac,
                        int(out.nonfinite.sum()))
