"""Explicit finite-difference solvers for the porous medium equation and the
nonlinear density equation of the Markov model's continuum limit.

``pme_step`` advances ``d rho/dt = coeff * d^2(rho^m)/dx^2``; ``nlpde_step``
advances::

    d rho/dt = 1 / (2 (1 - rho)^2) * (1/2 d^2(rho^2)/dx^2 - rho^2 d^2 rho/dx^2)

Both use cell-centred grids with reflecting (zero-flux) walls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .analysis import GAUSSIAN_LIMIT, QGaussianFit, fit_q_gaussian_xy, q_gaussian_integral
from .errors import ConfigurationError, DomainError, ModelViolationError, UnsupportedParameterError

STABILITY_FACTOR = 0.4
NEGATIVE_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class PMEGrid:
    """Density on ``n_cells`` uniform cells over ``[x_lo, x_hi]``.

    ``m`` is the porosity exponent for the PME; ``None`` marks a grid for the
    nonlinear density equation. ``mass0`` is the mass at construction, kept so
    drift can be reported.
    """

    x_lo: float
    x_hi: float
    rho: np.ndarray
    time: float
    dt: float
    m: float | None = 2.0
    coeff: float = 1.0
    stability_factor: float = STABILITY_FACTOR
    mass0: float | None = None

    def __post_init__(self):
        rho = np.array(self.rho, dtype=np.float64).ravel()
        if rho.size < 3:
            raise ConfigurationError("grid needs at least 3 cells")
        if not self.x_hi > self.x_lo:
            raise ConfigurationError("x_hi must exceed x_lo")
        if np.any(rho < 0):
            raise ConfigurationError("density must be non-negative")
        if self.m is not None and self.m < 1:
            raise UnsupportedParameterError(f"porosity exponent must be >= 1, got {self.m}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        if self.mass0 is None:
            object.__setattr__(self, "mass0", float(rho.sum() * self.dx))

    @property
    def n_cells(self) -> int:
        return self.rho.size

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.rho.size

    @property
    def x(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.n_cells) + 0.5) * self.dx

    def mass(self) -> float:
        return float(self.rho.sum() * self.dx)

    def mass_drift(self) -> float:
        return self.mass() - self.mass0

    def max_stable_dt(self) -> float:
        """Largest ``dt`` allowed by the stability bound at the current density."""
        peak = float(self.rho.max())
        if self.m is None:
            diffusivity = peak / (2.0 * (1.0 - peak)) if peak < 1.0 else math.inf
        elif self.m == 1.0:
            diffusivity = self.coeff
        else:
            diffusivity = self.m * self.coeff * peak ** (self.m - 1.0)
        if diffusivity == 0.0:
            return math.inf
        return self.stability_factor * self.dx ** 2 / (2.0 * diffusivity)

    def with_dt(self, dt: float) -> "PMEGrid":
        return replace(self, dt=float(dt))

    def fit(self, q_fixed: float | None = None) -> QGaussianFit:
        """q-Gaussian fit of the density in physical units."""
        return fit_q_gaussian_xy(self.x, self.rho, q_fixed)

    def support_edges(self, threshold: float = 1e-12) -> tuple[float, float]:
        """Centres of the outermost cells with ``rho > threshold``."""
        idx = np.flatnonzero(self.rho > threshold)
        if idx.size == 0:
            return math.nan, math.nan
        x = self.x
        return float(x[idx[0]]), float(x[idx[-1]])


def _laplacian(u: np.ndarray) -> np.ndarray:
    # reflecting ghost cells: u[-1] = u[0], u[n] = u[n-1]
    lap = np.empty_like(u)
    lap[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    lap[0] = u[1] - u[0]
    lap[-1] = u[-2] - u[-1]
    return lap


def _check_dt(grid: PMEGrid):
    if not grid.dt > 0:
        raise ConfigurationError(f"time step must be positive, got {grid.dt}")
    bound = grid.max_stable_dt()
    if grid.dt > bound * (1 + 1e-12):
        raise ConfigurationError(
            f"dt={grid.dt:.6g} exceeds the stability bound {bound:.6g} "
            f"(factor {grid.stability_factor})")


def _finish(grid: PMEGrid, rho: np.ndarray) -> PMEGrid:
    worst = int(np.argmin(rho))
    if rho[worst] < -NEGATIVE_TOL:
        raise ModelViolationError(
            f"density {rho[worst]!r} in cell {worst} at t={grid.time + grid.dt:.6g}",
            site=worst, value=float(rho[worst]))
    np.maximum(rho, 0.0, out=rho)
    return replace(grid, rho=rho, time=grid.time + grid.dt)


def pme_step(grid: PMEGrid) -> PMEGrid:
    """One explicit step of ``rho_t = coeff * (rho^m)_xx``."""
    if grid.m is None:
        raise ConfigurationError("grid has no porosity exponent; use nlpde_step")
    _check_dt(grid)
    rho = grid.rho
    u = rho if grid.m == 1.0 else rho ** grid.m
    lam = grid.coeff * grid.dt / grid.dx ** 2
    return _finish(grid, rho + lam * _laplacian(u))


def nlpde_step(grid: PMEGrid) -> PMEGrid:
    """One explicit step of the nonlinear density equation (valid for ``rho < 1``)."""
    rho = grid.rho
    if rho.max() >= 1.0:
        raise DomainError(f"density reaches {rho.max():.6g}; the equation needs rho < 1")
    _check_dt(grid)
    rho2 = rho * rho
    rhs = (0.5 * _laplacian(rho2) - rho2 * _laplacian(rho)) / (2.0 * (1.0 - rho) ** 2)
    return _finish(grid, rho + grid.dt / grid.dx ** 2 * rhs)


def barenblatt_time(q: float, sigma_q: float, mass: float = 1.0, coeff: float = 1.0) -> float:
    """Time since the point-source start at which the self-similar solution has width ``sigma_q``.

    ``q = 2 - m``; with ``alpha = 1/(m+1)`` the solution of ``rho_t = coeff (rho^m)_xx``
    has ``sigma^2 = (2m / alpha) C (coeff t)^(2 alpha)`` and peak
    ``(coeff t)^(-alpha) C^(1/(m-1))``, which gives the closed form below.
    """
    m = 2.0 - q
    if abs(1.0 - q) < GAUSSIAN_LIMIT:
        return sigma_q ** 2 / (4.0 * coeff)
    if q >= 1.0:
        raise UnsupportedParameterError(f"q must be below 1, got {q}")
    alpha = 1.0 / (m + 1.0)
    peak = mass / (sigma_q * q_gaussian_integral(q))
    return sigma_q ** 2 * alpha / (2.0 * m) * peak ** (-(m - 1.0)) / coeff


def _profile_cdf(q: float, u: np.ndarray) -> np.ndarray:
    """CDF of the normalised q-Gaussian in the scaled coordinate ``u = x / sigma``."""
    if abs(1.0 - q) < GAUSSIAN_LIMIT:
        return 0.5 * (1.0 + special.erf(u))
    v = np.clip(u * math.sqrt(1.0 - q), -1.0, 1.0)
    n = 1.0 / (1.0 - q)
    # (v + 1)/2 is Beta(n+1, n+1)-distributed under (1 - v^2)^n
    return special.betainc(n + 1.0, n + 1.0, 0.5 * (v + 1.0))


def barenblatt_profile(q: float, sigma_q: float, center: float, x_lo: float, x_hi: float,
                       n_cells: int, mass: float = 1.0, coeff: float = 1.0,
                       stability_factor: float = STABILITY_FACTOR) -> PMEGrid:
    """Self-similar solution with ``m = 2 - q`` as cell averages on a uniform grid.

    The grid's ``time`` is set so that the profile is the exact solution at
    that time, and ``dt`` to the stability limit.
    """
    if q >= 1.0:
        raise UnsupportedParameterError(
            f"compactly supported profiles need q < 1, got {q}; use gaussian_profile")
    if not sigma_q > 0:
        raise ConfigurationError("sigma_q must be positive")
    return _profile_grid(q, sigma_q, center, x_lo, x_hi, n_cells, mass, coeff,
                         2.0 - q, stability_factor)


def gaussian_profile(sigma: float, center: float, x_lo: float, x_hi: float, n_cells: int,
                     mass: float = 1.0, coeff: float = 1.0,
                     stability_factor: float = STABILITY_FACTOR) -> PMEGrid:
    """Heat-kernel profile ``exp(-x^2/sigma^2)`` on a grid with ``m = 1``."""
    return _profile_grid(1.0, sigma, center, x_lo, x_hi, n_cells, mass, coeff, 1.0,
                         stability_factor)


def _profile_grid(q, sigma, center, x_lo, x_hi, n_cells, mass, coeff, m, stability_factor):
    edges = np.linspace(x_lo, x_hi, int(n_cells) + 1)
    cdf = _profile_cdf(q, (edges - center) / sigma)
    dx = (x_hi - x_lo) / n_cells
    rho = mass * np.diff(cdf) / dx
    grid = PMEGrid(x_lo, x_hi, rho, barenblatt_time(q, sigma, mass, coeff), 1.0, m,
                   coeff, stability_factor)
    return grid.with_dt(grid.max_stable_dt())


def evolve_grids(grids: list[PMEGrid], steppers: list, t_end: float,
                 max_steps: int = 10_000_000) -> list[PMEGrid]:
    """Advance several grids in lock-step to ``t_end`` with a shared adaptive ``dt``."""
    steps = 0
    while grids[0].time < t_end * (1 - 1e-14):
        dt = min(min(g.max_stable_dt() for g in grids), t_end - grids[0].time)
        grids = [step(g.with_dt(dt)) for g, step in zip(grids, steppers)]
        steps += 1
        if steps > max_steps:
            raise ConfigurationError(f"exceeded {max_steps} steps before t={t_end}")
    return grids
