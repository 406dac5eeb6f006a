from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability mass per lattice site, starting at site ``origin``."""

    origin: int
    masses: np.ndarray

    def __post_init__(self):
        masses = np.array(self.masses, dtype=np.float64).ravel()
        if masses.size == 0:
            raise ConfigurationError("distribution needs at least one site")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ConfigurationError("masses must be finite and non-negative")
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "origin", int(self.origin))

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.origin, self.origin + self.masses.size)

    def mean(self) -> float:
        return float((self.sites * self.masses).sum() / self.total)

    def std(self) -> float:
        """Plain standard deviation of the (renormalised) mass."""
        x = self.sites - self.mean()
        return float(np.sqrt((x * x * self.masses).sum() / self.total))

    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.masses))

    def shifted(self, k: int) -> "Distribution":
        return Distribution(self.origin + k, self.masses)

    def scaled(self, c: float) -> "Distribution":
        return Distribution(self.origin, self.masses * c)
