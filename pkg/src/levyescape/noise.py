"""Symmetric alpha-stable noise: constants, samplers and tail diagnostics.

Two constants are kept apart on purpose:

* :func:`c_alpha` is ``alpha / (2**(1-alpha) pi) * Gamma(1+alpha/2) / Gamma(1-alpha/2)``,
  the normalization traditionally quoted for the jump measure.
* :func:`jump_intensity` is the density constant of the Levy measure of the
  standard symmetric stable law ``S_alpha(1, 0, 0)`` (characteristic function
  ``exp(-|xi|**alpha)``) on the real line. It is what the generator of the
  simulated process actually contains, so the solvers use it by default.

At ``alpha = 1`` the two are ``1/(2 pi)`` and ``1/pi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from . import kernels
from .errors import ConfigError, InsufficientData, OutOfDomain

TAG_SAMPLER = 2


def _check_open(alpha):
    if not 0.0 < alpha < 2.0:
        raise OutOfDomain(f"alpha must lie in (0,2), got {alpha}")


def c_alpha(alpha):
    _check_open(alpha)
    return alpha / (2.0 ** (1.0 - alpha) * np.pi) * gamma(1.0 + alpha / 2.0) / gamma(1.0 - alpha / 2.0)


def jump_intensity(alpha):
    """Levy density constant ``C`` with ``nu(dy) = C |y|**(-1-alpha) dy`` for S_alpha(1,0,0)."""
    _check_open(alpha)
    return (alpha * gamma((1.0 + alpha) / 2.0)
            / (2.0 ** (1.0 - alpha) * np.sqrt(np.pi) * gamma(1.0 - alpha / 2.0)))


def tail_constant(alpha):
    """``lim y**alpha P(L > y)`` for ``L ~ S_alpha(1, 0, 0)``."""
    return jump_intensity(alpha) / alpha


def jump_constant(alpha, convention="exact"):
    """Constant used in the generator: ``"exact"`` or ``"halved"`` (= :func:`c_alpha`)."""
    if convention == "exact":
        return jump_intensity(alpha)
    if convention == "halved":
        return c_alpha(alpha)
    raise ConfigError(f"unknown jump-constant convention {convention!r}")


@dataclass(frozen=True)
class StableParams:
    alpha: float
    scale: float = 1.0
    beta: float = 0.0
    shift: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise OutOfDomain("alpha must lie in (0,2]")
        if self.scale < 0:
            raise ConfigError("scale must be >= 0")
        if not -1.0 <= self.beta <= 1.0:
            raise ConfigError("beta must lie in [-1,1]")


@dataclass(frozen=True)
class NoiseSpec:
    """Levy index shared by both channels plus the two channel intensities."""

    alpha: float = 1.25
    sigma1: float = 0.5
    sigma2: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ConfigError(f"alpha must lie in (0,2], got {self.alpha}")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ConfigError("noise intensities must be >= 0")

    @property
    def brownian(self):
        return self.alpha == 2.0

    @property
    def ratio(self):
        if self.sigma1 <= 0:
            raise ConfigError("ratio sigma2/sigma1 undefined for sigma1 = 0")
        return self.sigma2 / self.sigma1

    def require_noise(self):
        if self.sigma1 == 0 and self.sigma2 == 0:
            raise ConfigError("at least one of sigma1, sigma2 must be > 0")


@dataclass
class Stream:
    """Explicit random stream: seed plus stream id plus a moving draw counter.

    Draws are Philox4x32 outputs addressed by ``(counter, stream_id, tag)``,
    so two streams with different ids never share a draw.
    """

    seed: int
    stream_id: int = 0
    position: int = field(default=0)

    def take(self, n):
        ctr = np.arange(self.position, self.position + n, dtype=np.uint64)
        self.position += n
        return ctr

    def uniform_pairs(self, n):
        return kernels.uniform_pairs(self.seed, self.take(n), self.stream_id, TAG_SAMPLER)

    def spawn(self, k):
        return Stream(self.seed, self.stream_id * 1_000_003 + k + 1)


def _as_stream(rng):
    if isinstance(rng, Stream):
        return rng
    return Stream(int(rng))


def sample_standard(alpha, rng, n, antithetic=False):
    """``n`` draws of S_alpha(1, 0, 0) via the Chambers-Mallows-Stuck transform.

    ``alpha = 2`` gives N(0, 2). With ``antithetic`` the second half of the
    vector is the negation of the first (same underlying uniforms).
    """
    if not 0.0 < alpha <= 2.0:
        raise OutOfDomain(f"alpha must lie in (0,2], got {alpha}")
    stream = _as_stream(rng)
    n = int(n)
    if antithetic:
        u1, u2 = stream.uniform_pairs((n + 1) // 2)
        x = kernels._pykernels.cms_transform(float(alpha), u1, u2)
        return np.concatenate([x, -x])[:n]
    u1, u2 = stream.uniform_pairs(n)
    return kernels._pykernels.cms_transform(float(alpha), u1, u2)


def sample(params: StableParams, rng, n):
    if params.beta != 0.0 or params.shift != 0.0:
        raise ConfigError("only symmetric centred stable laws are supported")
    return params.scale * sample_standard(params.alpha, rng, n)


def increment(spec: NoiseSpec, channel, dt, rng, n=None):
    """Noise increment of one channel over a step ``dt``.

    ``sigma * dt**(1/alpha) * S_alpha(1,0,0)`` for alpha < 2 and standard
    Brownian ``sigma * sqrt(dt) * N(0,1)`` at alpha = 2. Returns a float
    when ``n`` is None, else an array of ``n`` increments.
    """
    if channel not in (1, 2):
        raise ConfigError("channel must be 1 or 2")
    if not dt > 0:
        raise ConfigError("dt must be > 0")
    sigma = spec.sigma1 if channel == 1 else spec.sigma2
    count = 1 if n is None else int(n)
    stream = _as_stream(rng)
    xi = kernels.noise_draws(spec.alpha, stream.seed, stream.take(count),
                             stream.stream_id, TAG_SAMPLER)
    if spec.brownian:
        out = sigma * np.sqrt(dt) * xi
    else:
        out = sigma * dt ** (1.0 / spec.alpha) * xi
    if sigma == 0.0:
        out = np.zeros_like(out)
    return float(out[0]) if n is None else out


@dataclass(frozen=True)
class TailEstimate:
    alpha: float
    half_width: float
    k: int
    power_tail: bool
    profile: dict


def _hill(sorted_desc, k):
    top = sorted_desc[: k + 1]
    if top[k] <= 0:
        return np.nan
    logs = np.log(top[:k]) - np.log(top[k])
    s = logs.sum()
    return k / s if s > 0 else np.nan


def tail_exponent(samples, fraction=0.01, min_samples=100_000):
    """Hill estimate of the tail index from ``|samples|`` (diagnostic only).

    The estimate is repeated at several order-statistic fractions; if it
    exceeds 2 or drifts by more than 25% across them the result is flagged
    ``power_tail=False``.
    """
    x = np.abs(np.asarray(samples, dtype=float))
    x = x[np.isfinite(x)]
    if x.size < min_samples:
        raise InsufficientData(f"need at least {min_samples} samples, got {x.size}")
    x = np.sort(x)[::-1]
    k = max(int(fraction * x.size), 10)
    if x[0] == x[k]:
        raise InsufficientData("upper order statistics are all equal; no tail to fit")
    est = _hill(x, k)
    profile = {}
    for frac in (fraction / 2, fraction, 2 * fraction, 5 * fraction):
        kk = max(int(frac * x.size), 10)
        profile[frac] = _hill(x, kk)
    vals = np.array(list(profile.values()))
    drift = (np.nanmax(vals) - np.nanmin(vals)) / np.nanmin(vals)
    power = bool(np.all(np.isfinite(vals)) and np.nanmax(vals) < 2.0 and drift < 0.25)
    return TailEstimate(float(est), float(1.96 * est / np.sqrt(k)), k, power, profile)
