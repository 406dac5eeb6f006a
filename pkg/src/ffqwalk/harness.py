"""Batch runs: scheduled measurements, checkpoint/resume, sweeps, PME checks.

A run directory holds::

    series.csv            one row per scheduled measurement
    checkpoint.csv        latest resumable state (versioned header)
    final_state.csv       state at the last step
    final_distribution.csv
    manifest.json         config, versions, conservation ledger, file list
    dist_t<t>.csv         optional per-measurement snapshots
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, snapshots
from .analysis import (ScalingSeries, estimate_exponent, fit_q_gaussian, joint_q_fit,
                       running_average)
from .distribution import Distribution
from .errors import (CheckpointError, ConfigurationError, FFQWalkError, RunAbortedError,
                     UnsupportedParameterError)
from .markov import MarkovEngine, MarkovState, standard_markov_state
from .pme import (PMEGrid, barenblatt_profile, evolve_grids, gaussian_profile, nlpde_step,
                  pme_step)
from .walk import (DEFAULT_EPSILON_TRUNC, CoinAngle, WalkEngine, WalkerState, beta_gamma_state,
                   standard_initial_state, single_site_state)

log = logging.getLogger(__name__)

MODELS = ("feed_forward", "homogeneous", "markov", "pme", "nlpde")
WORKERS_ENV = "FFQWALK_WORKERS"
# q used for the width fit when the config leaves it unset
DEFAULT_Q = {"feed_forward": 0.5, "homogeneous": None, "markov": 0.0, "pme": None, "nlpde": 0.0}
# the homogeneous walk is two-peaked, so only its standard deviation is measured
UNFITTED = ("homogeneous",)
SERIES_COLUMNS = ["t", "time", "window_size", "total_mass", "truncated_mass", "ledger_error",
                  "std", "fit_ok", "q", "sigma_q", "amplitude", "center", "residual_rms"]


@dataclass(frozen=True)
class RunConfig:
    model: str = "feed_forward"
    steps: int = 1_000_000
    theta: float = math.pi / 4
    initial: str = "paper_default"
    epsilon_trunc: float = DEFAULT_EPSILON_TRUNC
    per_decade: int = 8
    window: int = 11
    q_fixed: float | None = None
    checkpoint_every: int = 100_000
    snapshots: bool = False
    # continuum models only
    m: float = 2.0
    sigma0: float = 20.0
    output_dir: str | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown model {self.model!r}; choose from {MODELS}")
        if int(self.steps) < 1:
            raise ConfigurationError("steps must be >= 1")
        if not 0.0 < self.epsilon_trunc < 1e-6:
            raise ConfigurationError(f"epsilon_trunc must lie in (0, 1e-6), got {self.epsilon_trunc}")
        if self.per_decade < 1 or self.checkpoint_every < 1:
            raise ConfigurationError("per_decade and checkpoint_every must be >= 1")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigurationError(f"smoothing window must be a positive odd integer, got {self.window}")
        if not math.isfinite(self.theta):
            raise ConfigurationError("theta must be finite")
        parse_initial(self.initial)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path, **overrides) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def fit_q(self) -> float | None:
        if self.q_fixed is not None:
            return self.q_fixed
        if self.model == "pme":
            return 2.0 - self.m
        return DEFAULT_Q[self.model]

    def dynamics_hash(self) -> str:
        """Hash of every field that shapes the trajectory or its measurements.

        ``steps`` is included: it fixes the measurement schedule and, for the
        continuum models, the domain size.
        """
        d = self.to_dict()
        for key in ("output_dir", "checkpoint_every", "snapshots"):
            d.pop(key)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def parse_initial(spec: str):
    """Parse ``paper_default``, ``single_site``, ``beta_gamma:B,G`` or ``file:PATH``."""
    if spec in ("paper_default", "single_site"):
        return spec, None
    kind, _, arg = spec.partition(":")
    if kind == "beta_gamma":
        try:
            beta, gamma = (float(v) for v in arg.split(","))
        except ValueError:
            raise ConfigurationError(f"beta_gamma needs two numbers, got {arg!r}") from None
        if not (0.0 <= beta <= 1.0 and 0.0 <= gamma <= 1.0):
            raise ConfigurationError(f"beta and gamma must lie in [0, 1], got {beta}, {gamma}")
        return kind, (beta, gamma)
    if kind == "file" and arg:
        return kind, arg
    raise ConfigurationError(f"unrecognised initial state {spec!r}")


def initial_walker(spec: str) -> WalkerState:
    kind, arg = parse_initial(spec)
    if kind == "paper_default":
        return standard_initial_state()
    if kind == "single_site":
        return single_site_state()
    if kind == "beta_gamma":
        return beta_gamma_state(*arg)
    return snapshots.read_walker(arg)


def initial_markov(spec: str) -> MarkovState:
    kind, arg = parse_initial(spec)
    if kind == "paper_default":
        return standard_markov_state()
    if kind == "single_site":
        return MarkovState.from_sites({0: (0.5, 0.5)})
    if kind == "beta_gamma":
        return MarkovState.from_walker(beta_gamma_state(*arg))
    header, _, rows = snapshots.read_table(arg)
    if header["kind"] == "walker":
        return MarkovState.from_walker(snapshots.walker_from_table(header, rows))
    return snapshots.markov_from_table(header, rows)


def measurement_times(steps: int, per_decade: int = 8) -> list[int]:
    """Log-spaced step counts ``round(10^(k/per_decade))`` up to ``steps``, plus ``steps``."""
    times = set()
    k = 0
    while True:
        t = int(round(10 ** (k / per_decade)))
        if t > steps:
            break
        times.add(t)
        k += 1
    times.add(int(steps))
    return sorted(times)


def measure_distribution(dist: Distribution, q_fixed: float | None, window: int) -> dict:
    """Smoothed q-Gaussian fit plus plain moments; fit failures are recorded, not raised."""
    row = {"std": dist.std(), "fit_ok": False, "q": math.nan, "sigma_q": math.nan,
           "amplitude": math.nan, "center": math.nan, "residual_rms": math.nan}
    try:
        fit = fit_q_gaussian(running_average(dist, window), q_fixed)
    except FFQWalkError as exc:
        log.debug("fit skipped: %s", exc)
        return row
    row.update(fit_ok=True, q=fit.q, sigma_q=fit.sigma_q, amplitude=fit.amplitude,
               center=fit.center, residual_rms=fit.residual_rms)
    return row


class _LatticeRun:
    """Adapter between the lattice engines and the run loop."""

    def __init__(self, config: RunConfig, restored=None):
        self.config = config
        if config.model == "markov":
            state = restored if restored is not None else initial_markov(config.initial)
            self.engine = MarkovEngine(state, config.epsilon_trunc)
        else:
            state = restored if restored is not None else initial_walker(config.initial)
            coin = CoinAngle(config.theta) if config.model == "homogeneous" else None
            self.engine = WalkEngine(state, config.epsilon_trunc, coin=coin)

    @property
    def t(self) -> int:
        return self.engine.t

    @t.setter
    def t(self, value: int):
        if value != self.engine.t:
            raise CheckpointError(f"checkpoint step {value} disagrees with state step {self.engine.t}")

    def advance(self, n: int):
        self.engine.advance(n)

    def distribution(self) -> Distribution:
        return self.engine.distribution()

    def measure(self) -> dict:
        dist = self.distribution()
        total = dist.total
        trunc = self.engine.truncated_mass
        row = {"t": self.t, "time": float(self.t), "window_size": self.engine.width,
               "total_mass": total, "truncated_mass": trunc,
               "ledger_error": total + trunc - 1.0}
        if self.config.model in UNFITTED:
            row.update(std=dist.std(), fit_ok=False, q=math.nan, sigma_q=math.nan,
                       amplitude=math.nan, center=math.nan, residual_rms=math.nan)
        else:
            row.update(measure_distribution(dist, self.config.fit_q, self.config.window))
        return row

    def write_state(self, target, extra: dict):
        if self.config.model == "markov":
            snapshots.write_markov(self.engine.state(), target, extra)
        else:
            snapshots.write_walker(self.engine.state(), target, extra)

    @staticmethod
    def restore(config: RunConfig, header: dict, rows):
        if config.model == "markov":
            return snapshots.markov_from_table(header, rows)
        return snapshots.walker_from_table(header, rows)


class _ContinuumRun:
    """PME / nonlinear-density runs from a self-similar profile with a fixed ``dt``.

    The step count plays the role of ``t``; the ``time`` column is the
    physical time measured from the point-source start. The fixed ``dt`` is
    the stability bound of the initial profile, which only loosens as the
    peak decays.
    """

    def __init__(self, config: RunConfig, restored: PMEGrid | None = None):
        self.config = config
        self.stepper = pme_step if config.model == "pme" else nlpde_step
        self.grid = restored if restored is not None else self._initial()
        self.t = 0

    def _initial(self) -> PMEGrid:
        cfg = self.config
        if cfg.model == "nlpde":
            q, coeff = 0.0, 0.25
        else:
            if not 1.0 <= cfg.m < 3.0:
                raise UnsupportedParameterError(f"porosity exponent must lie in [1, 3), got {cfg.m}")
            q, coeff = 2.0 - cfg.m, 1.0
        dx = cfg.sigma0 / 20.0

        def build(n):
            if q == 1.0:
                return gaussian_profile(cfg.sigma0, 0.0, -n * dx / 2, n * dx / 2, n, coeff=coeff)
            return barenblatt_profile(q, cfg.sigma0, 0.0, -n * dx / 2, n * dx / 2, n, coeff=coeff)

        probe = build(int(math.ceil(2 * _pme_domain(q, cfg.sigma0, 1.0) / dx)))
        growth = ((probe.time + cfg.steps * probe.dt) / probe.time) ** (1.0 / (3.0 - q))
        grid = build(int(math.ceil(2 * _pme_domain(q, cfg.sigma0, growth) / dx)))
        if cfg.model == "nlpde":
            grid = replace(grid, m=None)
            grid = grid.with_dt(grid.max_stable_dt())
        return grid

    def advance(self, n: int):
        grid = self.grid
        for _ in range(n):
            grid = self.stepper(grid)
        self.grid = grid
        self.t += n

    def distribution(self) -> Distribution:
        return Distribution(0, self.grid.rho * self.grid.dx)

    def measure(self) -> dict:
        g = self.grid
        total = g.mass()
        lo, hi = g.support_edges()
        width = int(round((hi - lo) / g.dx)) + 1 if math.isfinite(lo) else 0
        row = {"t": self.t, "time": g.time, "window_size": width, "total_mass": total,
               "truncated_mass": 0.0, "ledger_error": total - g.mass0}
        w = g.rho / g.rho.sum()
        mean = float((g.x * w).sum())
        row["std"] = float(np.sqrt(((g.x - mean) ** 2 * w).sum()))
        row.update(fit_ok=False, q=math.nan, sigma_q=math.nan, amplitude=math.nan,
                   center=math.nan, residual_rms=math.nan)
        try:
            fit = g.fit(self.config.fit_q)
        except FFQWalkError:
            return row
        row.update(fit_ok=True, q=fit.q, sigma_q=fit.sigma_q, amplitude=fit.amplitude,
                   center=fit.center, residual_rms=fit.residual_rms)
        return row

    def write_state(self, target, extra: dict):
        snapshots.write_grid(self.grid, target, extra)

    @staticmethod
    def restore(config: RunConfig, header: dict, rows):
        return snapshots.grid_from_table(header, rows)


@dataclass
class RunResult:
    config: RunConfig
    rows: list[dict]
    final: Distribution
    output_dir: Path | None = None
    series_q: float | None = None

    @property
    def width_column(self) -> str:
        return "std" if self.config.model in UNFITTED else "sigma_q"

    @property
    def series(self) -> ScalingSeries:
        """``(time, width)`` over rows with a usable width; ``sigma_q`` unless the model is unfitted."""
        col = self.width_column
        samples = [(r["time"], r[col]) for r in self.rows
                   if (col == "std" or r["fit_ok"]) and r["time"] > 0 and r[col] > 0]
        return ScalingSeries(tuple(samples), self.series_q)

    def exponent(self, t_min: float, t_max: float) -> tuple[float, float]:
        return estimate_exponent(self.series, t_min, t_max)

    def ledger_max_error(self) -> float:
        return max(abs(r["ledger_error"]) for r in self.rows)


def _row_values(row: dict) -> list:
    return [row[c] for c in SERIES_COLUMNS]


def _parse_row(values: list[str]) -> dict:
    row = {}
    for col, v in zip(SERIES_COLUMNS, values):
        if col in ("t", "window_size"):
            row[col] = int(v)
        elif col == "fit_ok":
            row[col] = v == "true"
        else:
            row[col] = float(v)
    return row


def _versions() -> dict:
    import numba
    import scipy
    return {"ffqwalk": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__}


class _RunFiles:
    """Writes a run's files and its manifest; keeps track of what exists."""

    def __init__(self, out: Path, config: RunConfig):
        self.out = out
        self.config = config
        self.written: list[str] = []

    def path(self, name: str) -> Path:
        return self.out / name

    def note(self, name: str):
        if name not in self.written:
            self.written.append(name)

    def write_series(self, rows: list[dict]):
        snapshots.write_table(self.path("series.csv"), "series",
                              {"model": self.config.model, "q_fit": self.config.fit_q},
                              SERIES_COLUMNS, (_row_values(r) for r in rows))
        self.note("series.csv")

    def manifest(self, status: str, rows: list[dict], error: str | None = None):
        ledger = {"max_abs_ledger_error": max((abs(r["ledger_error"]) for r in rows), default=None),
                  "final_truncated_mass": rows[-1]["truncated_mass"] if rows else None,
                  "measurements": len(rows)}
        config = self.config.to_dict()
        # location-independent, so a resumed or relocated run reproduces it
        config.pop("output_dir")
        doc = {"format": "ffqwalk-run", "version": 1, "status": status, "config": config,
               "dynamics_hash": self.config.dynamics_hash(), "versions": _versions(),
               "ledger": ledger, "files": sorted(self.written)}
        if error:
            doc["error"] = error
        with open(self.path("manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_evolution(config: RunConfig, resume: bool = False,
                  halt_at: int | None = None) -> RunResult:
    """Evolve ``config.model``, measuring on a log-spaced schedule.

    With an output directory, a checkpoint is written every
    ``checkpoint_every`` steps and at the end; ``resume=True`` continues from
    it and reproduces the uninterrupted run's files byte for byte.
    ``halt_at`` stops at the first checkpoint at or beyond that step, leaving a
    ``partial`` manifest; the returned ``final`` is then the halted state.
    """
    runner_cls = _ContinuumRun if config.model in ("pme", "nlpde") else _LatticeRun
    out = Path(config.output_dir) if config.output_dir else None
    files = None
    rows: list[dict] = []
    restored = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        files = _RunFiles(out, config)
    step0 = 0
    if resume:
        if files is None:
            raise ConfigurationError("resume needs an output directory")
        restored, step0, rows = _load_checkpoint(config, files)
    runner = runner_cls(config, restored)
    runner.t = step0

    schedule = [t for t in measurement_times(config.steps, config.per_decade) if t > runner.t]
    every = config.checkpoint_every
    if halt_at is not None and files is None:
        raise ConfigurationError("halt_at needs an output directory to checkpoint into")
    halted = False
    try:
        if runner.t == 0 and not rows:
            rows.append(runner.measure() | {"t": 0})
            if files:
                files.write_series(rows)
        for target in schedule:
            while runner.t < target:
                next_ck = (runner.t // every + 1) * every
                stop = min(target, next_ck)
                runner.advance(stop - runner.t)
                if files and runner.t % every == 0 and runner.t != target:
                    _write_checkpoint(runner, config, files, rows)
                    if halt_at is not None and runner.t >= halt_at:
                        halted = True
                        break
            if halted:
                break
            row = runner.measure()
            rows.append(row)
            if files:
                files.write_series(rows)
                if config.snapshots:
                    name = f"dist_t{runner.t}.csv"
                    snapshots.write_distribution(runner.distribution(), files.path(name), {"t": runner.t})
                    files.note(name)
                if runner.t % every == 0 or runner.t == config.steps:
                    _write_checkpoint(runner, config, files, rows)
                    if halt_at is not None and halt_at <= runner.t < config.steps:
                        halted = True
                        break
        final = runner.distribution()
        if halted:
            files.manifest("partial", rows)
        elif files:
            runner.write_state(files.path("final_state.csv"), {"model": config.model})
            files.note("final_state.csv")
            snapshots.write_distribution(final, files.path("final_distribution.csv"), {"t": runner.t})
            files.note("final_distribution.csv")
            files.manifest("complete", rows)
    except OSError as exc:
        if files is None:
            raise
        try:
            files.manifest("aborted", rows, error=str(exc))
        except OSError:
            pass
        raise RunAbortedError(f"write failed: {exc}", manifest=str(files.path("manifest.json"))) from exc
    return RunResult(config, rows, final, out, config.fit_q)


def _write_checkpoint(runner, config: RunConfig, files: _RunFiles, rows: list[dict]):
    extra = {"checkpoint_version": 1, "model": config.model, "dynamics_hash": config.dynamics_hash(),
             "step": runner.t, "measured": len(rows)}
    tmp = files.path("checkpoint.csv.tmp")
    runner.write_state(tmp, extra)
    os.replace(tmp, files.path("checkpoint.csv"))
    files.note("checkpoint.csv")


def _load_checkpoint(config: RunConfig, files: _RunFiles):
    path = files.path("checkpoint.csv")
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    header, _, rows = snapshots.read_table(path)
    if header.get("checkpoint_version") != "1":
        raise CheckpointError(f"unsupported checkpoint version {header.get('checkpoint_version')!r}")
    if header.get("model") != config.model or header.get("dynamics_hash") != config.dynamics_hash():
        raise CheckpointError("checkpoint was written by a different configuration; refusing to resume")
    step = int(header["step"])
    if step > config.steps:
        raise CheckpointError(f"checkpoint at step {step} is beyond the requested {config.steps} steps")
    state = (_ContinuumRun if config.model in ("pme", "nlpde") else _LatticeRun).restore(config, header, rows)
    series_path = files.path("series.csv")
    if not series_path.exists():
        raise CheckpointError("checkpoint has no matching series.csv")
    _, _, series_rows = snapshots.read_table(series_path, "series")
    measured = [_parse_row(r) for r in series_rows]
    measured = [r for r in measured if r["t"] <= step]
    if len(measured) != int(header["measured"]):
        raise CheckpointError("series.csv does not match the checkpoint")
    for name in ("series.csv", "checkpoint.csv"):
        files.note(name)
    if config.snapshots:
        files.written.extend(sorted(p.name for p in files.out.glob("dist_t*.csv")
                                    if int(p.stem[6:]) <= step))
    return state, step, measured


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepPoint:
    beta: float
    gamma: float
    q_estimate: float | None
    fit_ok: bool
    localized: bool
    sigma_at_t1: float
    sigma_at_t2: float
    std_at_t1: float
    std_at_t2: float
    error: str | None = None


@dataclass
class SweepResult:
    resolution: int
    steps_a: int
    steps_b: int
    points: list[SweepPoint] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.resolution, self.resolution)

    def q_grid(self) -> np.ndarray:
        """q estimates indexed ``[beta_index, gamma_index]``; NaN where not fitted."""
        grid = np.full(self.shape, np.nan)
        for k, p in enumerate(self.points):
            if p.fit_ok:
                grid[k // self.resolution, k % self.resolution] = p.q_estimate
        return grid

    def fitted_q(self) -> np.ndarray:
        return np.array([p.q_estimate for p in self.points if p.fit_ok])

    def localized(self) -> list[SweepPoint]:
        return [p for p in self.points if p.localized]

    def write_csv(self, path):
        cols = ["beta", "gamma", "q_estimate", "fit_ok", "localized", "sigma_at_t1",
                "sigma_at_t2", "std_at_t1", "std_at_t2", "error"]
        snapshots.write_table(path, "sweep", {"resolution": self.resolution, "steps_a": self.steps_a,
                                              "steps_b": self.steps_b}, cols,
                              ([getattr(p, c) for c in cols[:-1]] + [(p.error or "").replace(",", ";")]
                               for p in self.points))


def localization_threshold(steps_a: int, steps_b: int) -> float:
    """Width ratio below which a point counts as localized (1% growth per decade)."""
    return 1.01 ** math.log10(steps_b / steps_a)


def sweep_point(beta: float, gamma: float, steps_a: int, steps_b: int, window: int = 11,
                epsilon_trunc: float = DEFAULT_EPSILON_TRUNC) -> SweepPoint:
    engine = WalkEngine(beta_gamma_state(beta, gamma), epsilon_trunc)
    engine.advance(steps_a)
    dist_a = engine.distribution()
    engine.advance(steps_b - steps_a)
    dist_b = engine.distribution()
    std_a, std_b = dist_a.std(), dist_b.std()
    if std_b < std_a * localization_threshold(steps_a, steps_b):
        return SweepPoint(beta, gamma, None, False, True, math.nan, math.nan, std_a, std_b)
    try:
        fit = joint_q_fit(running_average(dist_a, window), steps_a,
                          running_average(dist_b, window), steps_b)
    except FFQWalkError as exc:
        best = getattr(exc, "best", None)
        return SweepPoint(beta, gamma, getattr(best, "q", None), False, False,
                          getattr(best, "sigma_a", math.nan), getattr(best, "sigma_b", math.nan),
                          std_a, std_b, error=f"{type(exc).__name__}: {exc}")
    return SweepPoint(beta, gamma, fit.q, True, False, fit.sigma_a, fit.sigma_b, std_a, std_b)


def _sweep_task(args):
    return sweep_point(*args)


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise ConfigurationError(f"worker count must be >= 1, got {workers}")
    return workers


def run_sweep(resolution: int, steps_a: int, steps_b: int, *, window: int = 11,
              epsilon_trunc: float = DEFAULT_EPSILON_TRUNC, workers: int | None = None,
              output_dir=None) -> SweepResult:
    """Two-time q estimate for every ``(beta, gamma)`` on a uniform grid over ``[0, 1]^2``."""
    if resolution < 2:
        raise ConfigurationError("sweep resolution must be >= 2")
    if not steps_b > steps_a >= 1:
        raise ConfigurationError(f"need 1 <= steps_a < steps_b, got {steps_a}, {steps_b}")
    axis = np.linspace(0.0, 1.0, resolution)
    tasks = [(float(b), float(g), steps_a, steps_b, window, epsilon_trunc)
             for b in axis for g in axis]
    n = worker_count(workers)
    if n == 1:
        points = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            points = list(pool.map(_sweep_task, tasks))
    result = SweepResult(resolution, steps_a, steps_b, points)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.write_csv(out / "sweep.csv")
    return result


# ------------------------------------------------------- PME validation

def _pme_domain(q: float, sigma0: float, growth: float) -> float:
    """Half-width of a domain four times the final support."""
    if q >= 1.0:
        return 4.0 * 3.0 * sigma0 * growth
    return 4.0 * sigma0 * growth / math.sqrt(1.0 - q)


def run_pme_validation(m: float, decades: float = 1.0, sigma0: float = 40.0,
                       cells_per_sigma: float = 40.0, per_decade: int = 8,
                       nlpde_peak: float = 0.01, output_dir=None) -> dict:
    """Check self-similar growth of the PME solution; for ``m = 2`` also compare
    the nonlinear density equation with its quarter-coefficient PME approximation.
    """
    if not 1.0 <= m < 3.0:
        raise UnsupportedParameterError(f"porosity exponent must lie in [1, 3), got {m}")
    q = 2.0 - m
    expected = 1.0 / (3.0 - q)
    growth = 10 ** (decades * expected)
    half = _pme_domain(q, sigma0, growth)
    dx = sigma0 / cells_per_sigma
    n = int(math.ceil(2 * half / dx))
    if q == 1.0:
        grid = gaussian_profile(sigma0, 0.0, -n * dx / 2, n * dx / 2, n)
    else:
        grid = barenblatt_profile(q, sigma0, 0.0, -n * dx / 2, n * dx / 2, n)
    t0 = grid.time
    times = t0 * np.logspace(0.0, decades, int(round(per_decade * decades)) + 1)
    rows = []
    for k, t in enumerate(times):
        if k:
            (grid,) = evolve_grids([grid], [pme_step], float(t))
        fit = grid.fit(q)
        free = grid.fit() if q < 1.0 else fit
        lo, hi = grid.support_edges()
        rows.append({"time": grid.time, "sigma_q": fit.sigma_q, "q_free": free.q,
                     "edge_halfwidth": 0.5 * (hi - lo), "mass_drift": grid.mass_drift()})
    series = ScalingSeries(tuple((r["time"], r["sigma_q"]) for r in rows), q)
    exponent, stderr = estimate_exponent(series, times[0], times[-1])
    report = {"m": m, "q": q, "decades": decades, "expected_exponent": expected,
              "exponent": exponent, "exponent_stderr": stderr,
              "relative_error": abs(exponent - expected) / expected,
              "max_abs_mass_drift": max(abs(r["mass_drift"]) for r in rows), "rows": rows}
    if q < 1.0:
        edge = ScalingSeries(tuple((r["time"], r["edge_halfwidth"]) for r in rows), q)
        report["edge_exponent"] = estimate_exponent(edge, times[0], times[-1])[0]
    if m == 2.0:
        report["nlpde"] = compare_nlpde(decades=decades, peak=nlpde_peak, per_decade=per_decade)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "pme_validation.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


def compare_nlpde(decades: float = 1.0, peak: float = 0.01, per_decade: int = 8,
                  dx: float = 1.0) -> dict:
    """Co-evolve the nonlinear density equation and ``rho_t = (rho^2)_xx / 4`` from the same profile.

    The start is the unit-mass ``q = 0`` profile with maximum density ``peak``;
    the L1 distance between the two solutions is reported relative to the mass.
    """
    sigma0 = 3.0 / (4.0 * peak)
    growth = 10 ** (decades / 3.0)
    half = _pme_domain(0.0, sigma0, growth)
    n = int(math.ceil(2 * half / dx))
    pme0 = barenblatt_profile(0.0, sigma0, 0.0, -n * dx / 2, n * dx / 2, n, coeff=0.25)
    nl0 = replace(pme0, m=None)
    grids = [pme0, nl0]
    t0 = pme0.time
    times = t0 * np.logspace(0.0, decades, int(round(per_decade * decades)) + 1)
    rows = []
    for k, t in enumerate(times):
        if k:
            grids = evolve_grids(grids, [pme_step, nlpde_step], float(t))
        p, r = grids
        l1 = float(np.abs(p.rho - r.rho).sum() * p.dx)
        rows.append({"time": p.time, "l1_relative": l1 / p.mass0, "max_rho": float(r.rho.max()),
                     "nlpde_mass_drift": r.mass_drift(), "pme_mass_drift": p.mass_drift()})
    return {"peak": peak, "sigma0": sigma0,
            "max_l1_relative": max(row["l1_relative"] for row in rows), "rows": rows}
