import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ffqwalk.analysis import (QGaussianFit, ScalingSeries, estimate_exponent,
                              estimate_q_two_times, fit_q_gaussian, fit_q_gaussian_xy,
                              joint_q_fit, q_gaussian, q_gaussian_integral, q_gaussian_variance,
                              residual_spectrum, running_average, scaling_series)
from ffqwalk.distribution import Distribution
from ffqwalk.errors import ConfigurationError, FitError, InsufficientDataError
from ffqwalk.walk import evolve, standard_initial_state, probability_distribution


def sampled(q, sigma, center=0.0, amplitude=1.0, pad=5):
    h = sigma / math.sqrt(1 - q) if q < 1 else 6 * sigma
    lo = int(math.floor(center - h)) - pad
    x = np.arange(lo, int(math.ceil(center + h)) + pad + 1)
    return Distribution(lo, q_gaussian(x, q, sigma, amplitude, center))


@pytest.fixture(scope="module")
def walk_dist():
    return probability_distribution(evolve(standard_initial_state(), 20_000))


# ---- model

def test_parabola_normalisation():
    assert q_gaussian_integral(0.0) == pytest.approx(4 / 3, abs=1e-15)
    sigma = 7.0
    area, _ = integrate.quad(lambda x: q_gaussian(x, 0.0, sigma), -sigma, sigma)
    assert area == pytest.approx(4 * sigma / 3, abs=1e-10)


@pytest.mark.parametrize("q", [-1.0, -0.3, 0.0, 0.5, 0.9, 1.0, 1.5, 2.0])
def test_integral_and_variance_by_quadrature(q):
    h = 1 / math.sqrt(1 - q) if q < 1 else np.inf
    area, _ = integrate.quad(lambda x: float(q_gaussian(x, q, 1.0)), -h, h, limit=200)
    assert area == pytest.approx(q_gaussian_integral(q), abs=1e-10)
    if q < 5 / 3 - 0.3:
        m2, _ = integrate.quad(lambda x: x * x * float(q_gaussian(x, q, 1.0)), -h, h, limit=200)
        assert m2 / area == pytest.approx(q_gaussian_variance(q, 1.0), rel=1e-9)


def test_gaussian_limit():
    x = np.linspace(-5, 5, 2001)
    assert np.abs(q_gaussian(x, 0.999, 1.0) - np.exp(-x * x)).max() < 1e-3


def test_compact_support_width():
    fit = QGaussianFit(0.5, 100.0, 1.0, 0.0, 0.0)
    assert 2 * fit.support_halfwidth == pytest.approx(282.84, abs=0.01)
    assert fit.model(np.array([141.5, -141.5])).tolist() == [0.0, 0.0]
    assert fit.model(np.array([141.0]))[0] > 0


# ---- running average

def test_window_one_is_identity(walk_dist):
    assert running_average(walk_dist, 1) is walk_dist


def test_delta_spreads_over_window():
    out = running_average(Distribution(10, np.array([1.0])), 3)
    assert out.origin == 9
    assert np.allclose(out.masses, 1 / 3, atol=1e-16)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=60), st.sampled_from([1, 3, 5, 11, 21]))
def test_running_average_preserves_mass(masses, window):
    dist = Distribution(-7, np.array(masses))
    assert running_average(dist, window).total == pytest.approx(dist.total, abs=1e-12)


def test_even_window_rejected(walk_dist):
    with pytest.raises(ConfigurationError):
        running_average(walk_dist, 10)


def test_smoothing_suppresses_spikes(feed_forward_run):
    dist = feed_forward_run.distribution(100_000)
    s11 = running_average(dist, 11)
    s21 = running_average(dist, 21)

    def roughness(d):
        return float(np.abs(np.diff(d.masses)).max())

    assert roughness(dist) / roughness(s11) >= 3
    f11, f21 = fit_q_gaussian(s11, 0.5), fit_q_gaussian(s21, 0.5)
    assert abs(f11.sigma_q / f21.sigma_q - 1) < 0.01


# ---- fitting

def test_recovers_exact_q_gaussian():
    fit = fit_q_gaussian(sampled(0.5, 200.0))
    assert fit.q == pytest.approx(0.5, abs=0.01)
    assert fit.sigma_q == pytest.approx(200.0, rel=0.005)
    assert fit.center == pytest.approx(0.0, abs=0.01)


@settings(max_examples=12)
@given(st.floats(-0.8, 0.9), st.floats(15.0, 150.0), st.floats(-20.0, 20.0))
def test_fit_idempotence(q, sigma, center):
    dist = sampled(q, sigma, center, amplitude=0.01)
    fit = fit_q_gaussian(dist)
    refit = fit_q_gaussian(Distribution(dist.origin, fit.model(dist.sites)))
    assert refit.q == pytest.approx(fit.q, abs=0.01)
    assert refit.sigma_q == pytest.approx(fit.sigma_q, rel=0.005)
    assert fit.q == pytest.approx(q, abs=0.01)


def test_fixed_q_fit(walk_dist):
    smooth = running_average(walk_dist, 11)
    fit = fit_q_gaussian(smooth, q_fixed=0.5)
    assert fit.q == 0.5 and fit.q_fixed
    # one more free parameter can only lower the residual
    assert fit_q_gaussian(smooth).residual_rms <= fit.residual_rms * (1 + 1e-9)


def test_fixed_q_fit_at_long_time(feed_forward_run):
    smooth = running_average(feed_forward_run.distribution(1_000_000), 11)
    fit = fit_q_gaussian(smooth, q_fixed=0.5)
    y = smooth.masses
    r2 = 1 - ((y - fit.model(smooth.sites)) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    # what is left after smoothing is the site-scale spike noise
    assert r2 > 0.8
    assert fit.residual_rms < 0.2 * fit.amplitude


def test_gaussian_special_case():
    fit = fit_q_gaussian(sampled(1.0, 12.0, 3.0), q_fixed=1.0)
    assert fit.sigma_q == pytest.approx(12.0, rel=1e-6)
    assert math.isinf(fit.support_halfwidth)


@pytest.mark.parametrize("c", [1e-3, 7.5])
def test_scale_covariance(walk_dist, c):
    base = fit_q_gaussian(running_average(walk_dist, 11))
    scaled = fit_q_gaussian(running_average(walk_dist.scaled(c), 11))
    assert scaled.amplitude == pytest.approx(c * base.amplitude, rel=1e-4)
    assert scaled.q == pytest.approx(base.q, abs=1e-4)
    assert scaled.sigma_q == pytest.approx(base.sigma_q, rel=1e-4)
    assert scaled.center == pytest.approx(base.center, abs=1e-3)


@pytest.mark.parametrize("k", [-1000, 37])
def test_translation_covariance(walk_dist, k):
    base = fit_q_gaussian(running_average(walk_dist, 11))
    moved = fit_q_gaussian(running_average(walk_dist.shifted(k), 11))
    assert moved.center == pytest.approx(base.center + k, abs=1e-3)
    assert moved.q == pytest.approx(base.q, abs=1e-4)
    assert moved.sigma_q == pytest.approx(base.sigma_q, rel=1e-4)
    assert moved.amplitude == pytest.approx(base.amplitude, rel=1e-4)


def test_too_few_bins():
    with pytest.raises(InsufficientDataError):
        fit_q_gaussian(Distribution(0, np.array([0.2, 0.6, 0.2])))


def test_non_convergence_reports_best_so_far(walk_dist):
    with pytest.raises(FitError) as info:
        fit_q_gaussian(walk_dist, max_iter=3)
    assert isinstance(info.value.best, QGaussianFit)
    assert "best" in info.value.record()


def test_xy_fit_on_physical_grid():
    x = np.linspace(-3, 3, 301)
    fit = fit_q_gaussian_xy(x, q_gaussian(x, 0.0, 2.0, 0.3, 0.25))
    assert fit.q == pytest.approx(0.0, abs=0.01) and fit.sigma_q == pytest.approx(2.0, rel=0.005)


# ---- exponent

def test_exact_power_law():
    t = np.logspace(1, 5, 10)
    series = scaling_series(zip(t, 3 * t ** 0.4))
    slope, stderr = estimate_exponent(series, 1, 1e6)
    assert slope == pytest.approx(0.4, abs=1e-12)
    assert stderr < 1e-10


@given(st.floats(0.05, 2.0), st.floats(0.01, 100.0))
def test_power_law_recovery_property(exponent, prefactor):
    t = np.logspace(0, 6, 25)
    slope, stderr = estimate_exponent(scaling_series(zip(t, prefactor * t ** exponent)), 1, 1e6)
    assert slope == pytest.approx(exponent, abs=1e-10)
    assert stderr < 1e-10


def test_exponent_needs_five_samples():
    series = scaling_series([(1, 1), (2, 2), (3, 3), (4, 4), (5, 5)])
    with pytest.raises(InsufficientDataError):
        estimate_exponent(series, 2, 5)


def test_series_must_increase():
    with pytest.raises(ConfigurationError):
        ScalingSeries(((2.0, 1.0), (1.0, 1.0)))


# ---- residual spectrum

def _parabola_fit():
    # support [-31, 32]: exactly 64 sites, so no zero padding
    return QGaussianFit(0.0, 32.0, 0.02, 0.5, 0.0)


def test_delta_residual_is_flat():
    fit = _parabola_fit()
    x = np.arange(-31, 33)
    y = fit.model(x)
    y[40] += 0.003
    spec = residual_spectrum(Distribution(-31, y), fit)
    assert spec.frequencies.size == spec.power.size == 33
    assert spec.slope_loglog == pytest.approx(0.0, abs=1e-10)


def test_sinusoid_residual_has_one_peak():
    fit = _parabola_fit()
    x = np.arange(-31, 33)
    y = fit.model(x) + 1e-4 * np.sin(2 * np.pi * 8 * x / 64)
    spec = residual_spectrum(Distribution(-31, y), fit)
    k = int(np.argmax(spec.power))
    assert spec.frequencies[k] == pytest.approx(8 / 64)
    others = np.delete(spec.power, k)
    assert others.max() < 1e-12 * spec.power[k]


def test_spectrum_zero_extends_short_distribution():
    fit = _parabola_fit()
    x = np.arange(-20, 21)
    spec = residual_spectrum(Distribution(-20, fit.model(x)), fit)
    assert np.all(spec.power >= 0)


def test_spectrum_needs_wide_support():
    fit = QGaussianFit(0.0, 5.0, 0.1, 0.0, 0.0)
    with pytest.raises(InsufficientDataError):
        residual_spectrum(Distribution(-5, fit.model(np.arange(-5, 6))), fit)


# ---- two-time q

def test_joint_fit_on_exact_profiles():
    ratio = 10.0
    sa = 40.0
    sb = sa * ratio ** (1 / 2.5)
    fit = joint_q_fit(sampled(0.5, sa, 3.0, 0.01), 1e5, sampled(0.5, sb, -4.0, 0.004), 1e6)
    assert fit.q == pytest.approx(0.5, abs=0.02)
    assert fit.sigma_a == pytest.approx(sa, rel=0.01)
    assert fit.center_b == pytest.approx(-4.0, abs=0.05)


def test_two_time_estimate_order_checked():
    d = sampled(0.0, 30.0)
    with pytest.raises(ConfigurationError):
        estimate_q_two_times(d, 10, d, 5)


def test_markov_two_time_q(markov_run):
    q = estimate_q_two_times(running_average(markov_run.distribution(100_000), 11), 1e5,
                             running_average(markov_run.distribution(1_000_000), 11), 1e6)
    assert q == pytest.approx(0.0, abs=0.05)
