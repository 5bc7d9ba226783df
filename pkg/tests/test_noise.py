import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.special import gamma

from levyescape import kernels
from levyescape.errors import ConfigError, InsufficientData, OutOfDomain
from levyescape.noise import (NoiseSpec, StableParams, Stream, c_alpha, increment,
                              jump_constant, jump_intensity, sample, sample_standard,
                              tail_constant, tail_exponent)

alphas = st.floats(0.05, 1.95)


def test_c_alpha_values():
    assert c_alpha(1.0) == pytest.approx(1 / (2 * np.pi), rel=1e-14)
    assert c_alpha(0.5) == pytest.approx(0.083236, abs=1e-5)
    a = 0.5
    exact = a / (2 ** (1 - a) * np.pi) * gamma(1 + a / 2) / gamma(1 - a / 2)
    assert c_alpha(a) == pytest.approx(exact, rel=1e-14)


def test_c_alpha_vanishes_toward_two():
    vals = [c_alpha(a) for a in (1.9, 1.99, 1.999, 1.9999)]
    assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-3


@pytest.mark.parametrize("a", [0.0, -0.5, 2.0, 2.5])
def test_constants_out_of_domain(a):
    for fn in (c_alpha, jump_intensity):
        with pytest.raises(OutOfDomain):
            fn(a)


@given(alphas)
def test_jump_mass_outside_unit_ball(a):
    dens = lambda y: c_alpha(a) * y ** (-1 - a)
    mass = 2 * quad(dens, 1, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    assert mass == pytest.approx(2 * c_alpha(a) / a, abs=1e-8)


def test_jump_intensity_known_values():
    assert jump_intensity(1.0) == pytest.approx(1 / np.pi)
    # Cauchy tail: P(L > y) ~ 1/(pi y)
    assert tail_constant(1.0) == pytest.approx(1 / np.pi)
    # the two conventions differ except in name
    assert jump_constant(1.0, "halved") == pytest.approx(c_alpha(1.0))
    with pytest.raises(ConfigError):
        jump_constant(1.0, "other")


@given(alphas)
def test_jump_intensity_matches_characteristic_exponent(a):
    # int (1 - cos y) C |y|^(-1-a) dy = |xi|^a at xi = 1 for S_a(1,0,0)
    near = quad(lambda y: (1 - np.cos(y)) * y ** (-1 - a), 0, 1, limit=200)[0]
    far = 1 / a - quad(lambda y: y ** (-1 - a), 1, np.inf, weight="cos", wvar=1.0)[0]
    val = 2 * jump_intensity(a) * (near + far)
    assert val == pytest.approx(1.0, rel=1e-7)


def test_gaussian_endpoint_variance():
    x = sample_standard(2.0, Stream(11), 1_000_000)
    assert x.var() == pytest.approx(2.0, abs=0.01)


def test_cauchy_quartiles():
    x = sample_standard(1.0, Stream(12), 1_000_000)
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    assert abs(med) < 0.01
    assert q3 - q1 == pytest.approx(2.0, abs=0.02)


def test_reproducible_streams():
    a = sample_standard(1.3, Stream(5, 2), 1000)
    b = sample_standard(1.3, Stream(5, 2), 1000)
    c = sample_standard(1.3, Stream(5, 3), 1000)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_stream_advances():
    s = Stream(3)
    a = sample_standard(1.5, s, 10)
    b = sample_standard(1.5, s, 10)
    assert not np.array_equal(a, b)
    assert np.array_equal(np.concatenate([a, b]), sample_standard(1.5, Stream(3), 20))


@given(st.floats(0.05, 2.0), st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_cms_symmetry(a, u1, u2):
    x = kernels._pykernels.cms_transform(a, np.array([u1]), np.array([u2]))
    y = kernels._pykernels.cms_transform(a, np.array([1.0 - u1]), np.array([u2]))
    assert y[0] == pytest.approx(-x[0], rel=1e-6, abs=1e-9)


def test_antithetic_halves():
    x = sample_standard(1.2, Stream(9), 100, antithetic=True)
    assert np.array_equal(x[50:], -x[:50])


@given(st.floats(0.1, 5.0))
def test_scale_property(delta):
    base = sample_standard(1.4, Stream(21), 50)
    scaled = sample(StableParams(1.4, delta), Stream(21), 50)
    assert np.allclose(scaled, delta * base, rtol=1e-15)


def test_asymmetric_rejected():
    with pytest.raises(ConfigError):
        sample(StableParams(1.0, beta=0.5), Stream(0), 10)
    with pytest.raises(OutOfDomain):
        sample_standard(0.0, Stream(0), 10)


def test_increment_zero_intensity():
    assert increment(NoiseSpec(1.5, 0.0, 1.0), 1, 0.01, Stream(1)) == 0.0
    assert np.all(increment(NoiseSpec(1.5, 0.0, 1.0), 1, 0.01, Stream(1), 100) == 0.0)


def test_increment_cauchy_scaling():
    sigma = 0.7
    x = increment(NoiseSpec(1.0, sigma, sigma), 1, 0.01, Stream(31), 1_000_000)
    q1, q3 = np.quantile(x, [0.25, 0.75])
    assert q3 - q1 == pytest.approx(0.02 * sigma, rel=0.02)


def test_increment_brownian_variance():
    x = increment(NoiseSpec(2.0, 1.0, 1.0), 2, 0.25, Stream(41), 1_000_000)
    assert x.var() == pytest.approx(0.25, rel=0.01)


def test_increment_bad_args():
    with pytest.raises(ConfigError):
        increment(NoiseSpec(), 3, 0.1, Stream(0))
    with pytest.raises(ConfigError):
        increment(NoiseSpec(), 1, 0.0, Stream(0))


def test_noise_spec_validation():
    with pytest.raises(ConfigError, match=r"alpha must lie in \(0,2\]"):
        NoiseSpec(alpha=2.5)
    with pytest.raises(ConfigError):
        NoiseSpec(sigma1=-1)
    with pytest.raises(ConfigError):
        NoiseSpec(sigma1=0, sigma2=0).require_noise()
    with pytest.raises(ConfigError):
        NoiseSpec(sigma1=0).ratio
    assert NoiseSpec(1.0, 0.5, 0.25).ratio == 0.5


def test_tail_constant_matches_sampler():
    # the sampler's tail agrees with the S_alpha(1,0,0) tail constant
    x = sample_standard(1.5, Stream(77), 2_000_000)
    y = 20.0
    est = y ** 1.5 * np.mean(x > y)
    assert est == pytest.approx(tail_constant(1.5), rel=0.1)


def test_hill_estimate_recovers_index():
    x = sample_standard(0.8, Stream(99), 1_000_000)
    est = tail_exponent(x)
    assert est.alpha == pytest.approx(0.8, abs=0.05)
    assert est.power_tail and est.half_width > 0


def test_hill_flags_gaussian():
    x = sample_standard(2.0, Stream(98), 1_000_000)
    assert not tail_exponent(x).power_tail


def test_hill_degenerate_and_small():
    with pytest.raises(InsufficientData):
        tail_exponent(np.ones(200_000))
    with pytest.raises(InsufficientData):
        tail_exponent(np.arange(100.0))
