"""Deterministic Morris-Lecar vector field in raw and rescaled coordinates.

The solver and the simulator work in rescaled coordinates
``v = v_raw / 10`` (tens of mV) and ``w = 10 * w_raw``; time is not rescaled.
With the default type-II parameters the stable rest state maps to
``(-2.7277, 1.2436)``.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError, NoConvergence, Singular

#: Subcritical Hopf current of the type-II set; the rest state is stable below it.
#: Documentation only, no algorithm uses it.
I_HOPF = 93.86


@dataclass(frozen=True)
class MLParams:
    """Morris-Lecar constants (type-II excitability defaults, ``I = 88``)."""

    C: float = 20.0
    g_Ca: float = 4.4
    g_K: float = 8.0
    g_L: float = 2.0
    V_Ca: float = 120.0
    V_K: float = -84.0
    V_L: float = -60.0
    V1: float = -1.2
    V2: float = 18.0
    V3: float = 2.0
    V4: float = 30.0
    phi: float = 0.04
    I: float = 88.0

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError("model.C must be > 0")
        # a zero conductance is allowed (leak-only test systems), negative is not
        for name in ("g_Ca", "g_K", "g_L"):
            if getattr(self, name) < 0:
                raise ConfigError(f"model.{name} must be >= 0")
        if self.V2 == 0 or self.V4 == 0:
            raise ConfigError("model.V2 and model.V4 must be nonzero")
        if not self.phi > 0:
            raise ConfigError("model.phi must be > 0")
        for key, val in asdict(self).items():
            if not np.isfinite(val):
                raise ConfigError(f"model.{key} must be finite")

    def as_array(self):
        """Pack in the field order expected by the compiled kernels."""
        return np.array([self.C, self.g_Ca, self.g_K, self.g_L, self.V_Ca,
                         self.V_K, self.V_L, self.V1, self.V2, self.V3,
                         self.V4, self.phi, self.I], dtype=np.float64)


@dataclass(frozen=True)
class ScalingMap:
    """Linear map raw -> scaled: ``v = v_scale * v_raw``, ``w = w_scale * w_raw``."""

    v_scale: float = 0.1
    w_scale: float = 10.0

    def __post_init__(self):
        if self.v_scale == 0 or self.w_scale == 0:
            raise ConfigError("scaling factors must be nonzero")

    def to_scaled(self, v_raw, w_raw):
        return v_raw * self.v_scale, w_raw * self.w_scale

    def to_raw(self, v, w):
        return v / self.v_scale, w / self.w_scale


def gating(v_raw, params=MLParams()):
    """Return ``(m_inf, w_inf, tau_w)`` at membrane potential ``v_raw`` (mV)."""
    p = params
    m_inf = 0.5 * (1.0 + np.tanh((v_raw - p.V1) / p.V2))
    w_inf = 0.5 * (1.0 + np.tanh((v_raw - p.V3) / p.V4))
    tau_w = 1.0 / np.cosh((v_raw - p.V3) / (2.0 * p.V4))
    return m_inf, w_inf, tau_w


def drift_raw(v_raw, w_raw, params=MLParams()):
    p = params
    m_inf, w_inf, tau_w = gating(v_raw, p)
    f1 = (-p.g_Ca * m_inf * (v_raw - p.V_Ca) - p.g_K * w_raw * (v_raw - p.V_K)
          - p.g_L * (v_raw - p.V_L) + p.I) / p.C
    f2 = p.phi * (w_inf - w_raw) / tau_w
    return f1, f2


def drift(v, w, params=MLParams(), scaling=ScalingMap()):
    """Drift ``(f1, f2)`` in scaled coordinates, vectorized over ``v``, ``w``."""
    v_raw, w_raw = scaling.to_raw(v, w)
    f1, f2 = drift_raw(v_raw, w_raw, params)
    return scaling.v_scale * f1, scaling.w_scale * f2


def jacobian(v, w, params=MLParams(), scaling=ScalingMap()):
    """Analytic 2x2 Jacobian of :func:`drift` at a single scaled point."""
    p = params
    v_raw, w_raw = scaling.to_raw(v, w)
    m_inf, w_inf, _ = gating(v_raw, p)
    dm = 0.5 / p.V2 / np.cosh((v_raw - p.V1) / p.V2) ** 2
    dw_inf = 0.5 / p.V4 / np.cosh((v_raw - p.V3) / p.V4) ** 2
    x = (v_raw - p.V3) / (2.0 * p.V4)
    df1_dv = (-p.g_Ca * (dm * (v_raw - p.V_Ca) + m_inf) - p.g_K * w_raw - p.g_L) / p.C
    df1_dw = -p.g_K * (v_raw - p.V_K) / p.C
    df2_dv = p.phi * (dw_inf * np.cosh(x) + (w_inf - w_raw) * np.sinh(x) / (2.0 * p.V4))
    df2_dw = -p.phi * np.cosh(x)
    sv, sw = scaling.v_scale, scaling.w_scale
    return np.array([[df1_dv, df1_dw * sv / sw],
                     [df2_dv * sw / sv, df2_dw]])


def find_equilibrium(params=MLParams(), scaling=ScalingMap(), guess=(-2.5, 1.2),
                     tol=1e-10, max_iter=100):
    """Damped Newton iteration for a zero of the scaled drift.

    Raises NoConvergence if the residual 2-norm is not below ``tol`` after
    ``max_iter`` iterations.
    """
    x = np.asarray(guess, dtype=float).copy()

    def residual(y):
        return np.array(drift(y[0], y[1], params, scaling))

    r = residual(x)
    for _ in range(max_iter):
        if np.linalg.norm(r) <= tol:
            return float(x[0]), float(x[1])
        try:
            dx = np.linalg.solve(jacobian(x[0], x[1], params, scaling), -r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian at {x}") from exc
        lam = 1.0
        while lam > 1e-8:
            trial = x + lam * dx
            r_trial = residual(trial)
            if np.linalg.norm(r_trial) < np.linalg.norm(r):
                break
            lam *= 0.5
        x, r = trial, r_trial
    if np.linalg.norm(r) <= tol:
        return float(x[0]), float(x[1])
    raise NoConvergence(f"residual {np.linalg.norm(r):.3e} > {tol:.1e} after {max_iter} iterations")


def nullclines(v_samples, params=MLParams(), scaling=ScalingMap()):
    """Sample the v- and w-nullclines at the scaled potentials ``v_samples``.

    Returns ``(w_vnull, w_wnull)``, the scaled ``w`` on each nullcline.
    The v-nullcline is solved for ``w`` in closed form.
    """
    p = params
    v = np.asarray(v_samples, dtype=float)
    v_raw, _ = scaling.to_raw(v, 0.0)
    m_inf, w_inf, _ = gating(v_raw, p)
    denom = p.g_K * (v_raw - p.V_K)
    if np.any(denom == 0):
        raise Singular("v-nullcline undefined where g_K * (v - V_K) = 0")
    w_raw_v = (-p.g_Ca * m_inf * (v_raw - p.V_Ca) - p.g_L * (v_raw - p.V_L) + p.I) / denom
    return w_raw_v * scaling.w_scale, w_inf * scaling.w_scale


class MorrisLecarDrift:
    """Callable drift object; carries what the compiled kernels need."""

    kind = "ml"

    def __init__(self, params=MLParams(), scaling=ScalingMap()):
        self.params = params
        self.scaling = scaling

    def __call__(self, v, w):
        return drift(v, w, self.params, self.scaling)

    def kernel_args(self):
        return np.concatenate([self.params.as_array(),
                               [self.scaling.v_scale, self.scaling.w_scale]])

    def describe(self):
        return {"kind": self.kind, **asdict(self.params), **asdict(self.scaling)}


class ZeroDrift:
    kind = "zero"

    def __call__(self, v, w):
        z = np.zeros(np.broadcast(v, w).shape)
        return z, z.copy()

    def kernel_args(self):
        return np.zeros(0)

    def describe(self):
        return {"kind": self.kind}


def describe_drift(f):
    if hasattr(f, "describe"):
        return f.describe()
    return {"kind": "callable", "name": getattr(f, "__qualname__", repr(f))}
