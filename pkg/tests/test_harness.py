import filecmp
import io
import json
import math
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from ffqwalk import snapshots
from ffqwalk.distribution import Distribution
from ffqwalk.errors import CheckpointError, ConfigurationError, RunAbortedError
from ffqwalk.harness import (RunConfig, initial_markov, initial_walker, localization_threshold,
                             measurement_times, run_evolution, run_sweep, sweep_point,
                             worker_count)
from ffqwalk.markov import standard_markov_state
from ffqwalk.pme import barenblatt_profile
from ffqwalk.walk import evolve, standard_initial_state, single_site_state


# ---- configuration

@pytest.mark.parametrize("bad", [dict(steps=0), dict(epsilon_trunc=1e-6), dict(epsilon_trunc=0.0),
                                 dict(model="quantum"), dict(window=4),
                                 dict(initial="beta_gamma:1.5,0"), dict(initial="nonsense")])
def test_config_validation(bad):
    with pytest.raises(ConfigurationError):
        RunConfig(**bad)


def test_config_file_with_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": "markov", "steps": 500, "window": 21}))
    cfg = RunConfig.load(path, steps=700, q_fixed=None)
    assert (cfg.model, cfg.steps, cfg.window) == ("markov", 700, 21)
    path.write_text(json.dumps({"stepz": 5}))
    with pytest.raises(ConfigurationError):
        RunConfig.load(path)


def test_hash_ignores_output_location_only():
    a = RunConfig(steps=100, output_dir="x")
    assert a.dynamics_hash() == replace(a, output_dir="y", checkpoint_every=7).dynamics_hash()
    assert a.dynamics_hash() != replace(a, epsilon_trunc=1e-24).dynamics_hash()
    assert a.dynamics_hash() != replace(a, steps=101).dynamics_hash()


def test_initial_state_parsing(tmp_path):
    assert initial_walker("paper_default").identical(standard_initial_state())
    assert initial_walker("single_site").identical(single_site_state())
    assert initial_walker("beta_gamma:0.5,0").amplitude(0)[1] == pytest.approx(1 / math.sqrt(2))
    assert initial_markov("paper_default").identical(standard_markov_state())
    path = tmp_path / "w.csv"
    snapshots.write_walker(evolve(standard_initial_state(), 10), path)
    assert initial_walker(f"file:{path}").identical(evolve(standard_initial_state(), 10))
    assert initial_markov(f"file:{path}").mass() == pytest.approx(1.0)


def test_measurement_schedule():
    times = measurement_times(1000, 8)
    assert times[:3] == [1, 2, 3] and times[-1] == 1000
    assert 100 in times and 178 in times
    assert times == sorted(set(times))
    assert measurement_times(50, 8)[-1] == 50


# ---- evolution runs

def test_ledger_completeness(tmp_path):
    result = run_evolution(RunConfig(steps=5000, output_dir=str(tmp_path)))
    header, cols, rows = snapshots.read_table(tmp_path / "series.csv", "series")
    assert {"t", "sigma_q", "truncated_mass", "window_size"} <= set(cols)
    assert len(rows) == len(result.rows) == len(measurement_times(5000)) + 1
    for r in result.rows:
        assert abs(r["total_mass"] + r["truncated_mass"] - 1) < 1e-9
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert manifest["ledger"]["max_abs_ledger_error"] < 1e-9
    assert "numpy" in manifest["versions"]
    assert set(manifest["files"]) | {"manifest.json"} == {p.name for p in tmp_path.iterdir()}


def test_single_site_series_is_constant():
    result = run_evolution(RunConfig(steps=100, initial="single_site", per_decade=20))
    even = [r for r in result.rows if r["t"] % 2 == 0]
    assert len(even) > 5
    assert all(r["window_size"] == 1 and r["std"] == 0.0 for r in even)
    assert result.final.masses[0] == pytest.approx(1.0, abs=1e-15)


def test_identical_configs_give_identical_files(tmp_path):
    for name in ("a", "b"):
        run_evolution(RunConfig(steps=3000, output_dir=str(tmp_path / name)))
    for f in os.listdir(tmp_path / "a"):
        assert filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False)


@pytest.mark.parametrize("model", ["feed_forward", "homogeneous", "markov", "pme", "nlpde"])
def test_resume_is_byte_identical(tmp_path, model):
    cfg = RunConfig(model=model, steps=2000, checkpoint_every=300, snapshots=True)
    run_evolution(replace(cfg, output_dir=str(tmp_path / "straight")))
    split = replace(cfg, output_dir=str(tmp_path / "split"))
    partial = run_evolution(split, halt_at=700)
    assert partial.rows[-1]["t"] < 2000
    status = json.loads((tmp_path / "split" / "manifest.json").read_text())["status"]
    assert status == "partial"
    run_evolution(split, resume=True, halt_at=1300)
    run_evolution(split, resume=True)
    names = sorted(os.listdir(tmp_path / "straight"))
    assert names == sorted(os.listdir(tmp_path / "split"))
    for f in names:
        assert filecmp.cmp(tmp_path / "straight" / f, tmp_path / "split" / f, shallow=False), f


def test_resume_refuses_other_config(tmp_path):
    cfg = RunConfig(steps=2000, checkpoint_every=500, output_dir=str(tmp_path))
    run_evolution(cfg, halt_at=500)
    with pytest.raises(CheckpointError):
        run_evolution(replace(cfg, epsilon_trunc=1e-24), resume=True)
    with pytest.raises(CheckpointError):
        run_evolution(replace(cfg, model="markov"), resume=True)


def test_resume_refuses_unknown_version(tmp_path):
    cfg = RunConfig(steps=1000, checkpoint_every=500, output_dir=str(tmp_path))
    run_evolution(cfg, halt_at=500)
    ck = tmp_path / "checkpoint.csv"
    ck.write_text(ck.read_text().replace("# checkpoint_version=1", "# checkpoint_version=9"))
    with pytest.raises(CheckpointError):
        run_evolution(cfg, resume=True)


def test_resume_without_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        run_evolution(RunConfig(steps=10, output_dir=str(tmp_path)), resume=True)


def test_write_failure_leaves_partial_manifest(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = snapshots.write_distribution

    def failing(*args, **kw):
        calls["n"] += 1
        if calls["n"] > 3:
            raise OSError("disk full")
        return real(*args, **kw)

    monkeypatch.setattr(snapshots, "write_distribution", failing)
    with pytest.raises(RunAbortedError) as info:
        run_evolution(RunConfig(steps=500, snapshots=True, output_dir=str(tmp_path)))
    manifest = json.loads(Path(info.value.manifest).read_text())
    assert manifest["status"] == "aborted" and "disk full" in manifest["error"]
    assert manifest["ledger"]["measurements"] >= 3


def test_homogeneous_run_uses_std():
    result = run_evolution(RunConfig(model="homogeneous", steps=10_000))
    assert result.width_column == "std"
    assert not any(r["fit_ok"] for r in result.rows)
    slope, _ = result.exponent(100, 10_000)
    assert slope == pytest.approx(1.0, abs=0.02)


def test_continuum_run_reports_physical_time():
    result = run_evolution(RunConfig(model="pme", m=2.0, steps=2000, sigma0=20.0))
    times = [r["time"] for r in result.rows]
    assert all(b > a for a, b in zip(times, times[1:]))
    assert result.exponent(times[1], times[-1])[0] == pytest.approx(1 / 3, abs=0.01)
    assert result.ledger_max_error() < 1e-12


# ---- sweep

def test_sweep_plumbing(tmp_path):
    result = run_sweep(2, 200, 2000, workers=1, output_dir=tmp_path)
    assert result.shape == (2, 2) and len(result.points) == 4
    assert result.q_grid().shape == (2, 2)
    header, cols, rows = snapshots.read_table(tmp_path / "sweep.csv", "sweep")
    assert len(rows) == 4 and cols[0] == "beta"


def test_localized_point_is_flagged():
    point = sweep_point(0.5, 0.0, 1000, 10_000)
    assert point.localized and not point.fit_ok and point.q_estimate is None


def test_sweep_independent_of_worker_count():
    serial = run_sweep(2, 100, 1000, workers=1)
    pooled = run_sweep(2, 100, 1000, workers=2)
    assert serial.points == pooled.points


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("FFQWALK_WORKERS", "3")
    assert worker_count() == 3
    with pytest.raises(ConfigurationError):
        worker_count(0)


def test_sweep_validation():
    with pytest.raises(ConfigurationError):
        run_sweep(1, 10, 100)
    with pytest.raises(ConfigurationError):
        run_sweep(2, 100, 100)


def test_localization_threshold_is_one_percent_per_decade():
    assert localization_threshold(1e5, 1e6) == pytest.approx(1.01)


# ---- snapshots

def test_walker_table_round_trip_is_exact():
    state = evolve(standard_initial_state(), 777)
    buf = io.StringIO()
    snapshots.write_walker(state, buf)
    buf.seek(0)
    assert snapshots.read_walker(buf).identical(state)


def test_markov_and_grid_round_trip(tmp_path):
    m = standard_markov_state()
    snapshots.write_markov(m, tmp_path / "m.csv")
    assert snapshots.read_markov(tmp_path / "m.csv").identical(m)
    g = barenblatt_profile(0.5, 10.0, 1.0, -30, 30, 120)
    snapshots.write_grid(g, tmp_path / "g.csv")
    back = snapshots.read_grid(tmp_path / "g.csv")
    assert np.array_equal(back.rho, g.rho) and back.time == g.time and back.dt == g.dt


def test_distribution_readable_from_any_table(tmp_path):
    d = Distribution(-3, np.array([0.1, 0.5, 0.4]))
    snapshots.write_distribution(d, tmp_path / "d.csv")
    assert np.array_equal(snapshots.read_distribution(tmp_path / "d.csv").masses, d.masses)
    snapshots.write_markov(standard_markov_state(), tmp_path / "m.csv")
    assert snapshots.read_distribution(tmp_path / "m.csv").masses.tolist() == [0.5, 0.5]


def test_wrong_table_kind_rejected(tmp_path):
    snapshots.write_markov(standard_markov_state(), tmp_path / "m.csv")
    with pytest.raises(CheckpointError):
        snapshots.read_walker(tmp_path / "m.csv")
    (tmp_path / "junk.csv").write_text("a,b\n1,2\n")
    with pytest.raises(CheckpointError):
        snapshots.read_table(tmp_path / "junk.csv")
