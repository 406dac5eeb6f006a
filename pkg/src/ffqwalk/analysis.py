"""Smoothing, q-Gaussian fitting, scaling exponents and residual spectra.

The q-Gaussian used throughout is ``A [1 - (1-q) u^2]_+^{1/(1-q)}`` with
``u = (x - center) / sigma``; it becomes ``A exp(-u^2)`` as q -> 1 and is
compactly supported on ``|u| <= 1/sqrt(1-q)`` for q < 1.

Fits minimise unweighted squared residuals of the probability values. The
amplitude enters linearly, so it is solved in closed form for every trial
``(q, sigma, center)`` and only those are searched numerically.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .distribution import Distribution
from .errors import ConfigurationError, FitError, InsufficientDataError

Q_GRID = np.round(np.arange(-1.0, 0.95 + 1e-9, 0.05), 10)
Q_BOUNDS = (-1.0, 0.95)
# below this distance from 1 the Gaussian limit is used
GAUSSIAN_LIMIT = 1e-3
MIN_FIT_BINS = 8
MIN_SPECTRUM_SITES = 32


def q_gaussian(x, q: float, sigma: float, amplitude: float = 1.0, center: float = 0.0):
    u2 = ((np.asarray(x, dtype=np.float64) - center) / sigma) ** 2
    if abs(1.0 - q) < GAUSSIAN_LIMIT:
        return amplitude * np.exp(-u2)
    base = 1.0 - (1.0 - q) * u2
    if q < 1.0:
        out = np.zeros_like(base)
        inside = base > 0
        out[inside] = base[inside] ** (1.0 / (1.0 - q))
        return amplitude * out
    return amplitude * base ** (1.0 / (1.0 - q))


def q_gaussian_integral(q: float) -> float:
    """Integral of the unit-amplitude, unit-width q-Gaussian over the real line (q < 3)."""
    if abs(1.0 - q) < GAUSSIAN_LIMIT:
        return math.sqrt(math.pi)
    if q < 1.0:
        n = 1.0 / (1.0 - q)
        return math.sqrt(math.pi / (1.0 - q)) * math.exp(special.gammaln(n + 1) - special.gammaln(n + 1.5))
    if q < 3.0:
        n = 1.0 / (q - 1.0)
        return math.sqrt(math.pi / (q - 1.0)) * math.exp(special.gammaln(n - 0.5) - special.gammaln(n))
    raise ConfigurationError("q-Gaussian is not normalisable for q >= 3")


def q_gaussian_variance(q: float, sigma: float) -> float:
    """Variance of the normalised q-Gaussian (finite for q < 5/3)."""
    return sigma * sigma / (5.0 - 3.0 * q)


@dataclass(frozen=True)
class QGaussianFit:
    q: float
    sigma_q: float
    amplitude: float
    center: float
    residual_rms: float
    q_fixed: bool = False

    def model(self, x):
        return q_gaussian(x, self.q, self.sigma_q, self.amplitude, self.center)

    @property
    def support_halfwidth(self) -> float:
        if self.q < 1.0 - GAUSSIAN_LIMIT:
            return self.sigma_q / math.sqrt(1.0 - self.q)
        return math.inf

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScalingSeries:
    """Width samples ``(t, sigma)`` with strictly increasing ``t``."""

    samples: tuple
    q_used: float | None = None

    def __post_init__(self):
        samples = tuple((float(t), float(s)) for t, s in self.samples)
        ts = [t for t, _ in samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigurationError("scaling series times must be strictly increasing")
        if any(t <= 0 or s <= 0 for t, s in samples):
            raise ConfigurationError("scaling series needs positive times and widths")
        object.__setattr__(self, "samples", samples)

    @property
    def t(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([s for _, s in self.samples])


@dataclass(frozen=True)
class SpectrumResult:
    frequencies: np.ndarray
    power: np.ndarray
    slope_loglog: float
    slope_stderr: float
    band: tuple[float, float]


def running_average(dist: Distribution, window: int) -> Distribution:
    """Centred moving mean over ``window`` sites.

    The result is padded by ``window // 2`` sites on each side so every site's
    mass is spread over a full window and the total is preserved.
    """
    if not isinstance(window, (int, np.integer)) or window < 1:
        raise ConfigurationError(f"smoothing window must be a positive integer, got {window!r}")
    if window % 2 == 0:
        raise ConfigurationError(f"smoothing window must be odd, got {window}")
    if window == 1:
        return dist
    half = window // 2
    smoothed = np.convolve(dist.masses, np.ones(window)) / window
    return Distribution(dist.origin - half, smoothed)


class _Profile:
    """Least-squares objective with the amplitude solved in closed form."""

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.x = x
        self.y = y
        self.yy = float(y @ y)

    def solve(self, q: float, sigma: float, center: float) -> tuple[float, float]:
        """Return (relative SSR, best amplitude)."""
        f = q_gaussian(self.x, q, sigma, 1.0, center)
        ff = float(f @ f)
        if ff == 0.0:
            return 1.0, 0.0
        yf = float(self.y @ f)
        amp = yf / ff
        ssr = self.yy - yf * amp
        return max(ssr, 0.0) / self.yy, amp


def _nelder_mead(fun, x0, steps, bounds=None, max_iter=4000):
    x0 = np.asarray(x0, dtype=np.float64)
    simplex = [x0]
    for i, step in enumerate(steps):
        vertex = x0.copy()
        vertex[i] += step
        # step the other way when the vertex would leave the box
        if bounds is not None and bounds[i][1] is not None and vertex[i] > bounds[i][1]:
            vertex[i] = x0[i] - step
        simplex.append(vertex)
    res = optimize.minimize(
        fun, x0, method="Nelder-Mead", bounds=bounds,
        options={"initial_simplex": np.array(simplex), "xatol": 1e-8, "fatol": 1e-15,
                 "maxiter": max_iter, "maxfev": 2 * max_iter})
    return res


def _xy(dist: Distribution) -> tuple[np.ndarray, np.ndarray]:
    return dist.sites.astype(np.float64), np.asarray(dist.masses)


def fit_q_gaussian_xy(x, y, q_fixed: float | None = None, max_iter: int = 4000) -> QGaussianFit:
    """Fit a q-Gaussian to samples ``y`` at positions ``x``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.count_nonzero(y) < MIN_FIT_BINS:
        raise InsufficientDataError(
            f"need at least {MIN_FIT_BINS} nonzero bins, got {np.count_nonzero(y)}")
    if q_fixed is not None and q_fixed > 1.0 + GAUSSIAN_LIMIT:
        raise ConfigurationError(f"q_fixed must be below 1 (or the Gaussian limit), got {q_fixed}")
    prof = _Profile(x, y)
    mu0 = float((x * y).sum() / y.sum())
    sd = float(np.sqrt(((x - mu0) ** 2 * y).sum() / y.sum()))
    sd = max(sd, 0.5)

    def width_guess(q):
        return sd * math.sqrt(5.0 - 3.0 * min(q, 1.0))

    def best_width(q):
        s0 = width_guess(q)
        r = optimize.minimize_scalar(lambda ls: prof.solve(q, math.exp(ls), mu0)[0],
                                     bounds=(math.log(s0) - 1.5, math.log(s0) + 1.5),
                                     method="bounded", options={"xatol": 1e-6})
        return r.fun, math.exp(r.x)

    if q_fixed is not None:
        q0 = float(q_fixed)
        _, s0 = best_width(q0)
        fun = lambda p: prof.solve(q0, math.exp(p[0]), p[1])[0]
        res = _nelder_mead(fun, [math.log(s0), mu0], [0.05, 0.05 * s0], max_iter=max_iter)
        log_s, mu = res.x
        q = q0
    else:
        grid = [(best_width(q), q) for q in Q_GRID]
        (_, s0), q0 = min(grid, key=lambda item: item[0][0])
        fun = lambda p: prof.solve(p[2], math.exp(p[0]), p[1])[0]
        bounds = [(None, None), (None, None), Q_BOUNDS]
        res = _nelder_mead(fun, [math.log(s0), mu0, q0], [0.05, 0.05 * s0, 0.05],
                           bounds=bounds, max_iter=max_iter)
        if res.success:
            # restart once from the optimum; a collapsed simplex can stall early
            res2 = _nelder_mead(fun, res.x, [0.01, 0.01 * s0, 0.01], bounds=bounds,
                                max_iter=max_iter)
            if res2.fun <= res.fun:
                res = res2
        log_s, mu, q = res.x
    sigma = math.exp(log_s)
    rel, amp = prof.solve(q, sigma, mu)
    rms = math.sqrt(rel * prof.yy / y.size)
    fit = QGaussianFit(float(q), sigma, amp, float(mu), rms, q_fixed is not None)
    if not res.success:
        raise FitError(f"q-Gaussian fit did not converge: {res.message}", best=fit)
    return fit


def fit_q_gaussian(dist: Distribution, q_fixed: float | None = None,
                   max_iter: int = 4000) -> QGaussianFit:
    """Least-squares q-Gaussian fit; free ``q`` unless ``q_fixed`` is given."""
    x, y = _xy(dist)
    return fit_q_gaussian_xy(x, y, q_fixed, max_iter)


def estimate_exponent(series: ScalingSeries, t_min: float, t_max: float) -> tuple[float, float]:
    """Slope and standard error of ``log sigma`` against ``log t`` on ``[t_min, t_max]``."""
    t, s = series.t, series.sigma
    keep = (t >= t_min) & (t <= t_max)
    if keep.sum() < 5:
        raise InsufficientDataError(
            f"need at least 5 samples in [{t_min}, {t_max}], got {int(keep.sum())}")
    return _ols(np.log(t[keep]), np.log(s[keep]))


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Slope and its standard error from centred residuals.

    ``linregress`` derives the error from ``1 - r^2``, which cancels to a
    ~1e-8 floor on exact power laws.
    """
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    slope = float(dx @ dy) / sxx
    resid = dy - slope * dx
    dof = x.size - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else math.inf
    return slope, stderr


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def residual_spectrum(dist: Distribution, fit: QGaussianFit) -> SpectrumResult:
    """Power spectrum of ``P_j - model_j`` over the fit's support.

    Sites of the support outside ``dist``'s window count as zero mass.

    The residual's mean is removed and it is zero-padded to the next power of
    two. The reported slope is an OLS fit of log power on log frequency over
    the middle two decades of positive frequencies (all of them if the band is
    narrower than that).
    """
    h = fit.support_halfwidth
    if math.isinf(h):
        lo, hi = dist.origin, dist.origin + dist.masses.size - 1
    else:
        lo, hi = math.ceil(fit.center - h), math.floor(fit.center + h)
    width = hi - lo + 1
    if width < MIN_SPECTRUM_SITES:
        raise InsufficientDataError(
            f"support spans {width} sites, need at least {MIN_SPECTRUM_SITES}")
    x = np.arange(lo, hi + 1)
    # sites outside the distribution's window carry zero mass
    observed = np.zeros(width)
    src_lo, src_hi = max(lo, dist.origin), min(hi, dist.origin + dist.masses.size - 1)
    if src_lo <= src_hi:
        observed[src_lo - lo:src_hi - lo + 1] = dist.masses[src_lo - dist.origin:src_hi - dist.origin + 1]
    resid = observed - fit.model(x)
    resid = resid - resid.mean()
    n = _next_pow2(width)
    spec = np.fft.rfft(resid, n=n)
    power = spec.real ** 2 + spec.imag ** 2
    freqs = np.fft.rfftfreq(n)

    lf_lo, lf_hi = math.log10(freqs[1]), math.log10(freqs[-1])
    if lf_hi - lf_lo > 2.0:
        mid = 0.5 * (lf_lo + lf_hi)
        band = (10 ** (mid - 1.0), 10 ** (mid + 1.0))
    else:
        band = (freqs[1], freqs[-1])
    sel = (freqs >= band[0]) & (freqs <= band[1]) & (power > 0)
    if sel.sum() < 3:
        raise InsufficientDataError("too few nonzero spectral bins in the slope band")
    slope, stderr = _ols(np.log10(freqs[sel]), np.log10(power[sel]))
    return SpectrumResult(freqs, power, slope, stderr, band)


@dataclass(frozen=True)
class JointQFit:
    q: float
    sigma_a: float
    sigma_b: float
    center_a: float
    center_b: float
    objective: float


def joint_q_fit(dist_a: Distribution, t_a: float, dist_b: Distribution, t_b: float,
                max_iter: int = 4000) -> JointQFit:
    """Shared-q fit of two snapshots whose widths obey ``sigma_b/sigma_a = (t_b/t_a)^(1/(3-q))``.

    For each trial q the two shapes are fitted jointly (common width
    parameter, separate centres and amplitudes); q is then chosen on a coarse
    grid and polished with a bounded scalar search.
    """
    if not t_b > t_a > 0:
        raise ConfigurationError(f"need 0 < t_a < t_b, got {t_a}, {t_b}")
    xa, ya = _xy(dist_a)
    xb, yb = _xy(dist_b)
    for y in (ya, yb):
        if np.count_nonzero(y) < MIN_FIT_BINS:
            raise InsufficientDataError(f"need at least {MIN_FIT_BINS} nonzero bins")
    pa, pb = _Profile(xa, ya), _Profile(xb, yb)
    mua = dist_a.mean()
    mub = dist_b.mean()
    sda = max(dist_a.std(), 0.5)
    ratio = t_b / t_a

    def inner(q, start=None):
        growth = ratio ** (1.0 / (3.0 - q))

        def fun(p):
            s = math.exp(p[0])
            return pa.solve(q, s, p[1])[0] + pb.solve(q, s * growth, p[2])[0]

        if start is None:
            s0 = sda * math.sqrt(5.0 - 3.0 * min(q, 1.0))
            start = [math.log(s0), mua, mub]
        s0 = math.exp(start[0])
        return _nelder_mead(fun, start, [0.05, 0.05 * s0, 0.05 * s0 * growth], max_iter=max_iter)

    grid = [(inner(q), q) for q in Q_GRID]
    best_res, best_q = min(grid, key=lambda item: item[0].fun)
    cache = {best_q: best_res}

    def outer(q):
        r = inner(q, start=best_res.x)
        cache[q] = r
        return r.fun

    lo = max(Q_BOUNDS[0], best_q - 0.05)
    hi = min(Q_BOUNDS[1], best_q + 0.05)
    polished = optimize.minimize_scalar(outer, bounds=(lo, hi), method="bounded",
                                        options={"xatol": 1e-4})
    q = float(polished.x) if polished.fun <= best_res.fun else best_q
    res = cache.get(q) or inner(q, start=best_res.x)
    growth = ratio ** (1.0 / (3.0 - q))
    s = math.exp(res.x[0])
    fit = JointQFit(q, s, s * growth, float(res.x[1]), float(res.x[2]), float(res.fun))
    if not res.success:
        raise FitError(f"joint fit did not converge at q={q:.4f}: {res.message}", best=fit)
    return fit


def estimate_q_two_times(dist_a: Distribution, t_a: float, dist_b: Distribution,
                         t_b: float) -> float:
    """q for which both snapshots are q-Gaussians with PME-consistent widths."""
    return joint_q_fit(dist_a, t_a, dist_b, t_b).q


def scaling_series(samples: Sequence[tuple[float, float]], q_used: float | None = None) -> ScalingSeries:
    return ScalingSeries(tuple(samples), q_used)
