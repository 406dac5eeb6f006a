"""Quantum walker states and the homogeneous / feed-forward step maps.

A walker lives on the integer lattice with a two-component amplitude
``(a_j, b_j)`` per site: ``a`` is shifted one site left by a step, ``b`` one
site right. Only a finite window of sites is stored; everything outside it is
exactly zero. After every step, edge sites whose probability falls below
``epsilon_trunc`` are dropped and their probability is booked in
``truncated_mass`` so that ``norm + truncated_mass`` stays at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _kernels
from ._buffer import DoubleBuffer
from .distribution import Distribution
from .errors import ConfigurationError, NumericOverflowError

DEFAULT_EPSILON_TRUNC = 1e-30


@dataclass(frozen=True)
class CoinAngle:
    """Angle of the homogeneous coin, in radians."""

    theta: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ConfigurationError(f"coin angle must be finite, got {self.theta!r}")

    @property
    def rate(self) -> float:
        """The constant rate ``cos(theta)`` that turns the feed-forward coin into this one."""
        return math.cos(self.theta)

    @property
    def complement(self) -> float:
        # sqrt(1 - cos^2) carrying the sign of sin; bitwise identical to the
        # feed-forward coin's complement whenever sin(theta) >= 0
        return math.copysign(math.sqrt(1.0 - min(self.rate * self.rate, 1.0)),
                             math.sin(self.theta))


@dataclass(frozen=True, eq=False)
class WalkerState:
    """Immutable walker snapshot.

    ``amplitudes`` has shape ``(n, 2)``: column 0 holds ``a_j``, column 1 holds
    ``b_j`` for sites ``window_lo .. window_lo + n - 1``.
    """

    window_lo: int
    amplitudes: np.ndarray
    step_count: int = 0
    truncated_mass: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1, 2)
        if amps.shape[0] == 0:
            raise ConfigurationError("walker window must hold at least one site")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "window_lo", int(self.window_lo))
        object.__setattr__(self, "step_count", int(self.step_count))
        object.__setattr__(self, "truncated_mass", float(self.truncated_mass))
        if self.step_count < 0 or self.truncated_mass < 0:
            raise ConfigurationError("step_count and truncated_mass must be non-negative")

    @classmethod
    def from_sites(cls, sites: dict, step_count: int = 0, truncated_mass: float = 0.0):
        """Build a state from ``{site: (a, b)}``."""
        if not sites:
            raise ConfigurationError("no sites given")
        lo, hi = min(sites), max(sites)
        amps = np.zeros((hi - lo + 1, 2), dtype=np.complex128)
        for j, (a, b) in sites.items():
            amps[j - lo] = (a, b)
        return cls(lo, amps, step_count, truncated_mass)

    @property
    def window_hi(self) -> int:
        return self.window_lo + self.amplitudes.shape[0] - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.window_lo, self.window_hi + 1)

    @property
    def a(self) -> np.ndarray:
        return self.amplitudes[:, 0]

    @property
    def b(self) -> np.ndarray:
        return self.amplitudes[:, 1]

    def amplitude(self, j: int) -> tuple[complex, complex]:
        """``(a_j, b_j)``; exact zeros outside the window."""
        if self.window_lo <= j <= self.window_hi:
            a, b = self.amplitudes[j - self.window_lo]
            return complex(a), complex(b)
        return 0j, 0j

    def probabilities(self) -> np.ndarray:
        amps = self.amplitudes
        return amps.real[:, 0] ** 2 + amps.imag[:, 0] ** 2 + amps.real[:, 1] ** 2 + amps.imag[:, 1] ** 2

    def norm(self) -> float:
        return float(self.probabilities().sum())

    def identical(self, other: "WalkerState") -> bool:
        """Bitwise equality of window, amplitudes, step count and ledger."""
        return (self.window_lo == other.window_lo
                and self.amplitudes.shape == other.amplitudes.shape
                and bool(np.array_equal(self.amplitudes, other.amplitudes))
                and self.step_count == other.step_count
                and self.truncated_mass == other.truncated_mass)

    def scaled(self, factor: complex) -> "WalkerState":
        return WalkerState(self.window_lo, self.amplitudes * factor,
                           self.step_count, self.truncated_mass)


def standard_initial_state() -> WalkerState:
    """``(a_0, b_0) = (a_1, b_1) = (1/2, i/2)``."""
    return WalkerState.from_sites({0: (0.5, 0.5j), 1: (0.5, 0.5j)})


def single_site_state(a: complex = 1 / math.sqrt(2), b: complex = 1j / math.sqrt(2)) -> WalkerState:
    return WalkerState.from_sites({0: (a, b)})


def beta_gamma_state(beta: float, gamma: float) -> WalkerState:
    """Two-site state ``(cos βπ, sin βπ)/√2`` at site 0 and ``(cos γπ, sin γπ)/√2`` at site 1."""
    if not (0.0 <= beta <= 1.0 and 0.0 <= gamma <= 1.0):
        raise ConfigurationError(f"beta and gamma must lie in [0, 1], got {beta}, {gamma}")
    r = 1 / math.sqrt(2)
    # degree-based trig is exact at multiples of 90 degrees; cos(pi/2) ~ 6e-17 would
    # seed the chaotic dynamics and destroy the localized cases
    return WalkerState.from_sites({
        0: (float(special.cosdg(180 * beta)) * r, float(special.sindg(180 * beta)) * r),
        1: (float(special.cosdg(180 * gamma)) * r, float(special.sindg(180 * gamma)) * r),
    })


def rate_function(state: WalkerState, j: int) -> complex:
    """``g_j = |a_{j-1}| + i |b_{j+1}|`` read from ``state``.

    ``|g|^2`` is bounded by the neighbours' probability, so it only exceeds 1
    by rounding; the steppers clamp it before taking ``sqrt(1 - |g|^2)``.
    """
    a_left, _ = state.amplitude(j - 1)
    _, b_right = state.amplitude(j + 1)
    return complex(abs(a_left), abs(b_right))


def coin_matrix(g: complex) -> np.ndarray:
    """The local 2x2 coin ``[[g, -s], [s, g*]]`` with ``s = sqrt(1 - |g|^2)``."""
    g2 = min(abs(g) ** 2, 1.0)
    s = math.sqrt(1.0 - g2)
    return np.array([[g, -s], [s, np.conj(g)]], dtype=np.complex128)


class WalkEngine(DoubleBuffer):
    """Mutable multi-step evolution of a walker, for long runs.

    ``coin=None`` runs the feed-forward walk; a :class:`CoinAngle` runs the
    homogeneous walk; a complex ``rate`` runs the feed-forward arithmetic with
    every ``g_j`` pinned to that constant.
    """

    rows = 4

    def __init__(self, state: WalkerState, epsilon_trunc: float = DEFAULT_EPSILON_TRUNC,
                 coin: CoinAngle | None = None, rate: complex | None = None):
        if not 0.0 < epsilon_trunc < 1.0:
            raise ConfigurationError(f"epsilon_trunc must lie in (0, 1), got {epsilon_trunc}")
        if coin is not None and rate is not None:
            raise ConfigurationError("give either a coin angle or a constant rate, not both")
        amps = state.amplitudes
        values = np.vstack([amps[:, 0].real, amps[:, 0].imag, amps[:, 1].real, amps[:, 1].imag])
        super().__init__(values, state.window_lo, state.step_count, state.truncated_mass,
                         epsilon_trunc)
        if coin is not None:
            self.mode = _kernels.MODE_CONSTANT
            self.coin = (coin.rate, 0.0, coin.complement)
        elif rate is not None:
            rate = complex(rate)
            g2 = min(rate.real * rate.real + rate.imag * rate.imag, 1.0)
            self.mode = _kernels.MODE_CONSTANT
            self.coin = (rate.real, rate.imag, math.sqrt(1.0 - g2))
        else:
            self.mode = _kernels.MODE_FEED_FORWARD
            self.coin = (0.0, 0.0, 0.0)

    def _kernel_advance(self, n: int):
        (self.cur, self.lo, self.hi, self.stale_lo, self.stale_hi,
         self.truncated_mass) = _kernels.walk_advance(
            self.buf, self.cur, self.lo, self.hi, self.stale_lo, self.stale_hi,
            n, self.epsilon_trunc, self.truncated_mass, self.mode, *self.coin)

    def _check(self, n: int):
        window = self.buf[self.cur, :, self.lo:self.hi + 1]
        finite = np.isfinite(window).all(axis=0)
        if not finite.all():
            site = int(np.argmin(finite)) + self.lo - self.offset
            raise NumericOverflowError(
                f"non-finite amplitude at site {site} by step {self.t}", site=site)

    def state(self) -> WalkerState:
        v = self.live()
        amps = np.empty((v.shape[1], 2), dtype=np.complex128)
        amps[:, 0] = v[0] + 1j * v[1]
        amps[:, 1] = v[2] + 1j * v[3]
        return WalkerState(self.window_lo, amps, self.t, self.truncated_mass)

    def probabilities(self) -> np.ndarray:
        v = self.buf[self.cur, :, self.lo:self.hi + 1]
        return (v * v).sum(axis=0)

    def distribution(self) -> Distribution:
        return Distribution(self.window_lo, self.probabilities())


def evolve(state: WalkerState, steps: int, *, epsilon_trunc: float = DEFAULT_EPSILON_TRUNC,
           coin: CoinAngle | None = None, rate: complex | None = None) -> WalkerState:
    """Return ``state`` advanced ``steps`` steps (feed-forward unless ``coin``/``rate`` given)."""
    if steps < 0:
        raise ConfigurationError("steps must be non-negative")
    engine = WalkEngine(state, epsilon_trunc, coin=coin, rate=rate)
    engine.advance(steps)
    return engine.state()


def feed_forward_step(state: WalkerState, epsilon_trunc: float = DEFAULT_EPSILON_TRUNC,
                      rate: complex | None = None) -> WalkerState:
    """One feed-forward step; every ``g_j`` is read from the pre-step state."""
    return evolve(state, 1, epsilon_trunc=epsilon_trunc, rate=rate)


def homogeneous_step(state: WalkerState, coin: CoinAngle | float,
                     epsilon_trunc: float = DEFAULT_EPSILON_TRUNC) -> WalkerState:
    """One step of the walk with the site-independent coin of angle ``coin``."""
    if not isinstance(coin, CoinAngle):
        coin = CoinAngle(float(coin))
    return evolve(state, 1, epsilon_trunc=epsilon_trunc, coin=coin)


@dataclass(frozen=True, eq=False)
class StepDecomposition:
    """Markov and interference parts of the next step's coin probabilities.

    Target arrays cover sites ``window_lo .. window_lo + len - 1`` (the grown
    window); ``beta`` covers the source sites starting at ``source_lo``.
    """

    window_lo: int
    markov_a: np.ndarray
    markov_b: np.ndarray
    interference_a: np.ndarray
    interference_b: np.ndarray
    source_lo: int
    beta: np.ndarray = field(repr=False)

    @property
    def prob_a(self) -> np.ndarray:
        return self.markov_a + self.interference_a

    @property
    def prob_b(self) -> np.ndarray:
        return self.markov_b + self.interference_b


def decompose_step(state: WalkerState) -> StepDecomposition:
    a = np.concatenate([[0j], state.a, [0j]])
    b = np.concatenate([[0j], state.b, [0j]])
    n = state.amplitudes.shape[0]
    pa = np.abs(a[:-2]) ** 2
    pb = np.abs(b[2:]) ** 2
    g2 = np.minimum(pa + pb, 1.0)
    g = np.sqrt(pa) + 1j * np.sqrt(pb)
    s = np.sqrt(1.0 - g2)
    a0, b0 = a[1:-1], b[1:-1]
    left, right = np.abs(a0) ** 2, np.abs(b0) ** 2
    beta = np.real(g * a0 * np.conj(b0))

    markov_a = np.zeros(n + 2)
    markov_b = np.zeros(n + 2)
    inter_a = np.zeros(n + 2)
    inter_b = np.zeros(n + 2)
    # source j writes a at j-1 (index j-lo) and b at j+1 (index j-lo+2)
    markov_a[:n] = g2 * left + (1.0 - g2) * right
    inter_a[:n] = -2.0 * s * beta
    markov_b[2:] = (1.0 - g2) * left + g2 * right
    inter_b[2:] = 2.0 * s * beta
    return StepDecomposition(state.window_lo - 1, markov_a, markov_b, inter_a, inter_b,
                             state.window_lo, beta)


def probability_distribution(state: WalkerState) -> Distribution:
    return Distribution(state.window_lo, state.probabilities())
