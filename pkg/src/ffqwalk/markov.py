"""The associated Markov model: the feed-forward walk with interference dropped.

Per site the state is a pair of occupations ``(L_j, R_j)``. One step moves
the pair at ``j`` to ``L_{j-1}`` and ``R_{j+1}``::

    R' + L' = R + L
    R' - L' = (2 (L_{j-1} + R_{j+1}) - 1) (R - L)

with the neighbour occupations taken from the pre-step state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._buffer import DoubleBuffer
from .distribution import Distribution
from .errors import ConfigurationError, ModelViolationError
from .walk import DEFAULT_EPSILON_TRUNC, WalkerState


@dataclass(frozen=True, eq=False)
class MarkovState:
    """Occupations ``left`` (L_j) and ``right`` (R_j) for sites ``window_lo ..``."""

    window_lo: int
    left: np.ndarray
    right: np.ndarray
    step_count: int = 0
    truncated_mass: float = 0.0

    def __post_init__(self):
        left = np.array(self.left, dtype=np.float64).ravel()
        right = np.array(self.right, dtype=np.float64).ravel()
        if left.size == 0 or left.shape != right.shape:
            raise ConfigurationError("left/right must be equal-length and non-empty")
        if np.any(left < 0) or np.any(right < 0):
            raise ConfigurationError("occupations must be non-negative")
        left.setflags(write=False)
        right.setflags(write=False)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "window_lo", int(self.window_lo))
        object.__setattr__(self, "step_count", int(self.step_count))
        object.__setattr__(self, "truncated_mass", float(self.truncated_mass))

    @classmethod
    def from_sites(cls, sites: dict, step_count: int = 0, truncated_mass: float = 0.0):
        """Build from ``{site: (L, R)}``."""
        lo, hi = min(sites), max(sites)
        left = np.zeros(hi - lo + 1)
        right = np.zeros(hi - lo + 1)
        for j, (l, r) in sites.items():
            left[j - lo], right[j - lo] = l, r
        return cls(lo, left, right, step_count, truncated_mass)

    @classmethod
    def from_walker(cls, state: WalkerState) -> "MarkovState":
        """``L_j = |a_j|^2``, ``R_j = |b_j|^2``."""
        return cls(state.window_lo, np.abs(state.a) ** 2, np.abs(state.b) ** 2,
                   state.step_count, state.truncated_mass)

    @property
    def window_hi(self) -> int:
        return self.window_lo + self.left.size - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.window_lo, self.window_hi + 1)

    def mass(self) -> float:
        return float((self.left + self.right).sum())

    def identical(self, other: "MarkovState") -> bool:
        return (self.window_lo == other.window_lo
                and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right)
                and self.step_count == other.step_count
                and self.truncated_mass == other.truncated_mass)


def standard_markov_state() -> MarkovState:
    """``(R_0, L_0) = (R_1, L_1) = 1/4``."""
    return MarkovState.from_sites({0: (0.25, 0.25), 1: (0.25, 0.25)})


class MarkovEngine(DoubleBuffer):
    rows = 2

    def __init__(self, state: MarkovState, epsilon_trunc: float = DEFAULT_EPSILON_TRUNC):
        if not 0.0 < epsilon_trunc < 1.0:
            raise ConfigurationError(f"epsilon_trunc must lie in (0, 1), got {epsilon_trunc}")
        super().__init__(np.vstack([state.left, state.right]), state.window_lo,
                         state.step_count, state.truncated_mass, epsilon_trunc)

    def _kernel_advance(self, n: int):
        (cur, lo, hi, slo, shi, trunc, bad_site, bad_value, ok) = _kernels.markov_advance(
            self.buf, self.cur, self.lo, self.hi, self.stale_lo, self.stale_hi,
            n, self.epsilon_trunc, self.truncated_mass)
        if not ok:
            site = int(bad_site) - self.offset
            raise ModelViolationError(
                f"occupation {bad_value!r} at site {site} is below the rounding "
                f"tolerance (-{_kernels.MARKOV_NEG_TOL})", site=site, value=float(bad_value))
        self.cur, self.lo, self.hi, self.stale_lo, self.stale_hi = cur, lo, hi, slo, shi
        self.truncated_mass = trunc

    def state(self) -> MarkovState:
        v = self.live()
        return MarkovState(self.window_lo, v[0], v[1], self.t, self.truncated_mass)

    def probabilities(self) -> np.ndarray:
        v = self.buf[self.cur, :, self.lo:self.hi + 1]
        return v[0] + v[1]

    def distribution(self) -> Distribution:
        return Distribution(self.window_lo, self.probabilities())


def evolve_markov(state: MarkovState, steps: int,
                  epsilon_trunc: float = DEFAULT_EPSILON_TRUNC) -> MarkovState:
    if steps < 0:
        raise ConfigurationError("steps must be non-negative")
    engine = MarkovEngine(state, epsilon_trunc)
    engine.advance(steps)
    return engine.state()


def markov_step(state: MarkovState, epsilon_trunc: float = DEFAULT_EPSILON_TRUNC) -> MarkovState:
    return evolve_markov(state, 1, epsilon_trunc)


def markov_distribution(state: MarkovState) -> Distribution:
    return Distribution(state.window_lo, state.left + state.right)
