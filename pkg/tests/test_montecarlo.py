import numpy as np
import pytest

from levyescape.errors import ConfigError, HorizonTooShort
from levyescape.model import MorrisLecarDrift, ZeroDrift, drift
from levyescape.montecarlo import (PathEstimate, SimConfig, estimate_fep, estimate_mfet,
                                   simulate, step)
from levyescape.noise import NoiseSpec
from levyescape.solver import S_STAR, Region, TargetStrip

UNIT = Region(-1.0, 1.0, -1.0, 1.0)
ML = MorrisLecarDrift()
BIG = Region(-1e6, 1e6, -1e6, 1e6)


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"t_max": 0.05}, {"n_paths": 0},
                                {"n_paths": 99}, {"workers": 0},
                                {"antithetic": True, "n_paths": 101}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        SimConfig(**kw)


def test_step_without_noise_at_rest_state():
    v, w = step(S_STAR, ML, NoiseSpec(1.5, 0.0, 0.0), 1e-3, seed=1)
    assert np.hypot(v - S_STAR[0], w - S_STAR[1]) < 1e-6


def test_step_without_noise_is_euler():
    v, w = step((0.0, 0.0), ML, NoiseSpec(1.5, 0.0, 0.0), 1e-3, seed=1)
    f1, f2 = drift(0.0, 0.0)
    assert (v, w) == pytest.approx((1e-3 * f1, 1e-3 * f2), rel=1e-14)
    assert f1 == pytest.approx(1.2479, abs=1e-4)


def test_step_matches_path_kernel():
    # the single-step helper and the path loop read the same noise addresses
    spec = NoiseSpec(1.25, 0.5, 0.5)
    cfg = SimConfig(dt=1e-3, t_max=0.1, n_paths=100, seed=5, validate=False)
    out = simulate(S_STAR, BIG, ML, spec, SimConfig(dt=1e-3, t_max=0.1, n_paths=100, seed=5))
    state = S_STAR
    for i in range(cfg.n_steps):
        state = step(state, ML, spec, cfg.dt, cfg.seed, path_id=3, index=i)
    assert state == pytest.approx((out.exit_v[3], out.exit_w[3]), rel=1e-9)


def test_brownian_variance_additivity():
    sigma, dt, n = 0.7, 1e-2, 100
    cfg = SimConfig(dt=dt, t_max=n * dt, n_paths=100_000, seed=3)
    out = simulate((0.0, 0.0), BIG, ZeroDrift(), NoiseSpec(2.0, sigma, 0.0), cfg)
    assert out.censored.all()
    assert out.exit_v.var() == pytest.approx(sigma ** 2 * n * dt, rel=0.02)


def test_start_outside():
    assert estimate_fep((2.0, 0.0), UNIT, TargetStrip(1.0)).mean == 1.0
    est = estimate_fep((1.0, 0.0), UNIT, TargetStrip(1.0))
    assert est.mean == 1.0 and est.half_width == 0.0
    assert estimate_fep((-2.0, 0.0), UNIT, TargetStrip(1.0)).mean == 0.0
    assert estimate_mfet((-2.0, 0.0), UNIT).mean == 0.0


def test_symmetric_fep_and_getoor_time():
    spec = NoiseSpec(1.0, 1.0, 0.0)
    cfg = SimConfig(dt=1e-4, t_max=50.0, n_paths=100_000, seed=17)
    out = simulate((0.0, 0.0), UNIT, ZeroDrift(), spec, cfg, TargetStrip(1.0))
    p = estimate_fep((0.0, 0.0), UNIT, TargetStrip(1.0), ZeroDrift(), spec, cfg, outcomes=out)
    u = estimate_mfet((0.0, 0.0), UNIT, ZeroDrift(), spec, cfg, outcomes=out)
    assert p.contains(0.5)
    assert u.contains(1.0)


def test_outcome_invariants():
    cfg = SimConfig(n_paths=2000, seed=2, t_max=200.0)
    out = simulate(S_STAR, Region(), ML, NoiseSpec(1.25, 0.5, 0.5), cfg)
    done = ~out.censored
    assert not np.any(Region().contains(out.exit_v[done], out.exit_w[done]))
    assert np.all(out.exit_v[out.reached_E] >= 1.0723)


def test_jump_exits_overshoot():
    region = Region()
    h = (region.b - region.a) / 210
    for alpha, expect in [(1.25, True), (2.0, False)]:
        cfg = SimConfig(n_paths=2000, seed=4, t_max=300.0)
        out = simulate(S_STAR, region, ML, NoiseSpec(alpha, 0.5, 0.5), cfg)
        v, w = out.exit_v[~out.censored], out.exit_w[~out.censored]
        dist = np.maximum.reduce([region.a - v, v - region.b, region.c - w, w - region.d])
        if expect:
            assert np.mean(dist > h) > 0
        else:
            assert dist.max() < 6 * 0.5 * np.sqrt(cfg.dt) + 10 * cfg.dt


def test_determinism_across_workers():
    spec = NoiseSpec(1.25, 0.5, 0.5)
    a = simulate(S_STAR, Region(), ML, spec, SimConfig(n_paths=300, seed=8, workers=1))
    b = simulate(S_STAR, Region(), ML, spec, SimConfig(n_paths=300, seed=8, workers=3))
    for name in ("exit_time", "exit_v", "exit_w", "reached_E", "censored"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_subset_paths_match_full_run():
    spec = NoiseSpec(1.5, 0.5, 0.5)
    full = simulate(S_STAR, Region(), ML, spec, SimConfig(n_paths=200, seed=8))
    part = simulate(S_STAR, Region(), ML, spec, SimConfig(n_paths=200, seed=8),
                    path_ids=np.arange(50, 60))
    assert np.array_equal(part.exit_v, full.exit_v[50:60])


def test_horizon_too_short():
    cfg = SimConfig(n_paths=200, t_max=0.5, seed=1)
    with pytest.raises(HorizonTooShort) as exc:
        estimate_mfet(S_STAR, Region(), ML, NoiseSpec(1.25, 0.25, 0.25), cfg)
    assert exc.value.censored_fraction > 0.01
    with pytest.raises(HorizonTooShort):
        estimate_fep(S_STAR, Region(), TargetStrip(), ML, NoiseSpec(1.25, 0.25, 0.25), cfg)
    loose = SimConfig(n_paths=200, t_max=0.5, seed=1, validate=False)
    est = estimate_fep(S_STAR, Region(), TargetStrip(), ML, NoiseSpec(1.25, 0.25, 0.25), loose)
    assert est.censored_fraction > 0.01


def test_half_width_scales_with_paths():
    spec = NoiseSpec(1.0, 1.0, 0.0)
    widths = []
    for n in (1000, 10_000, 100_000):
        cfg = SimConfig(dt=1e-3, t_max=50.0, n_paths=n, seed=21)
        widths.append(estimate_fep((0.2, 0.0), UNIT, TargetStrip(1.0), ZeroDrift(), spec, cfg).half_width)
    ratios = np.array(widths[:-1]) / np.array(widths[1:])
    assert np.allclose(ratios, np.sqrt(10), rtol=0.15)


def test_dt_robustness():
    spec = NoiseSpec(1.0, 1.0, 1.0)
    region = Region()
    ests = []
    for dt in (2e-3, 1e-3):
        cfg = SimConfig(dt=dt, t_max=200.0, n_paths=10_000, seed=31)
        ests.append(estimate_fep(S_STAR, region, TargetStrip(), ML, spec, cfg))
    assert abs(ests[0].mean - ests[1].mean) < ests[0].half_width + ests[1].half_width


def test_antithetic_estimate():
    spec = NoiseSpec(1.0, 1.0, 0.0)
    cfg = SimConfig(dt=1e-3, t_max=50.0, n_paths=20_000, seed=5, antithetic=True)
    out = simulate((0.0, 0.0), UNIT, ZeroDrift(), spec, cfg, TargetStrip(1.0))
    # paired paths see mirrored noise, so with zero drift they exit on opposite sides
    assert np.all(out.reached_E[0::2] != out.reached_E[1::2])
    est = estimate_fep((0.0, 0.0), UNIT, TargetStrip(1.0), ZeroDrift(), spec, cfg, outcomes=out)
    assert est.mean == 0.5 and est.half_width < 1e-12


def test_outcomes_csv(tmp_path):
    out = simulate(S_STAR, Region(), ML, NoiseSpec(1.0, 1.0, 1.0), SimConfig(n_paths=100, seed=1))
    path = tmp_path / "o.csv"
    out.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "path_id,exit_time,exit_v,exit_w,reached_E,censored"
    assert len(lines) == 101


def test_estimate_summary():
    e = PathEstimate(0.5, 0.01, 1000, 0.0)
    assert e.interval == (0.49, 0.51) and "0.5" in e.summary("fep")


def test_bridge_removes_discrete_monitoring_bias():
    # dX = dW on (-1, 1): E[tau | x = 0] = 1 exactly; dt is deliberately coarse
    spec = NoiseSpec(2.0, 1.0, 0.0)
    est = {br: estimate_mfet((0.0, 0.0), UNIT, ZeroDrift(), spec,
                             SimConfig(dt=1e-2, t_max=100, n_paths=20000, bridge=br))
           for br in (False, True)}
    assert est[True].contains(1.0)
    assert est[False].mean - est[False].half_width > 1.05


def test_bridge_exit_lands_on_an_edge():
    out = simulate((0.0, 0.0), UNIT, ZeroDrift(), NoiseSpec(2.0, 1.0, 1.0),
                   SimConfig(dt=1e-2, t_max=100, n_paths=2000))
    on_v = np.abs(out.exit_v) >= 1.0
    on_w = np.abs(out.exit_w) >= 1.0
    assert np.all(on_v | on_w)
    # the bridge only acts for Brownian noise
    jump = simulate((0.0, 0.0), UNIT, ZeroDrift(), NoiseSpec(1.5, 1.0, 1.0),
                    SimConfig(dt=1e-2, t_max=100, n_paths=500, bridge=True))
    ref = simulate((0.0, 0.0), UNIT, ZeroDrift(), NoiseSpec(1.5, 1.0, 1.0),
                   SimConfig(dt=1e-2, t_max=100, n_paths=500, bridge=False))
    assert np.array_equal(jump.exit_time, ref.exit_time)
