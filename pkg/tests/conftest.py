import cmath
import math
from collections import defaultdict

import numpy as np
from hypothesis import HealthCheck, settings

settings.register_profile("ffqwalk", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ffqwalk")


def naive_walk_step(sites: dict, coin_rate=None) -> dict:
    """Reference stepper on a dict ``{j: (a, b)}`` with plain complex arithmetic.

    ``coin_rate`` pins every g to a constant (the homogeneous walk).
    """
    new = defaultdict(lambda: [0j, 0j])
    for j, (a, b) in sites.items():
        if coin_rate is None:
            left = sites.get(j - 1, (0j, 0j))[0]
            right = sites.get(j + 1, (0j, 0j))[1]
            g = complex(abs(left), abs(right))
        else:
            g = complex(coin_rate)
        s = math.sqrt(max(0.0, 1.0 - abs(g) ** 2))
        new[j - 1][0] += g * a - s * b
        new[j + 1][1] += s * a + g.conjugate() * b
    return {j: (v[0], v[1]) for j, v in new.items()}


def naive_markov_step(sites: dict) -> dict:
    """Reference Markov stepper on ``{j: (L, R)}``."""
    new = defaultdict(lambda: [0.0, 0.0])
    for j, (left, right) in sites.items():
        c = 2.0 * (sites.get(j - 1, (0.0, 0.0))[0] + sites.get(j + 1, (0.0, 0.0))[1]) - 1.0
        total, diff = left + right, right - left
        new[j + 1][1] += 0.5 * (total + c * diff)
        new[j - 1][0] += 0.5 * (total - c * diff)
    return {j: tuple(v) for j, v in new.items()}


def state_to_dict(state) -> dict:
    return {int(j): (complex(a), complex(b)) for j, (a, b) in zip(state.sites, state.amplitudes)}


def max_site_diff(x: dict, y: dict) -> float:
    worst = 0.0
    for j in set(x) | set(y):
        xa = x.get(j, (0, 0))
        ya = y.get(j, (0, 0))
        worst = max(worst, abs(xa[0] - ya[0]), abs(xa[1] - ya[1]))
    return worst


def random_walker_dict(rng: np.random.Generator, n_sites: int, lo: int = 0) -> dict:
    z = rng.normal(size=(n_sites, 2)) + 1j * rng.normal(size=(n_sites, 2))
    z /= np.sqrt((np.abs(z) ** 2).sum())
    return {lo + k: (complex(z[k, 0]), complex(z[k, 1])) for k in range(n_sites)}


def phase(theta: float) -> complex:
    return cmath.exp(1j * theta)


# ---- shared long runs (computed once per session)

import pytest  # noqa: E402

from ffqwalk import snapshots  # noqa: E402
from ffqwalk.harness import RunConfig, run_evolution  # noqa: E402

DESK_STEPS = 1_000_000


class LongRun:
    def __init__(self, result):
        self.result = result
        self.dir = result.output_dir

    def distribution(self, t: int):
        if t == self.result.config.steps:
            return self.result.final
        return snapshots.read_distribution(self.dir / f"dist_t{t}.csv")


def _long_run(tmp_path_factory, model: str, steps: int = DESK_STEPS, **kw):
    out = tmp_path_factory.mktemp(model)
    config = RunConfig(model=model, steps=steps, output_dir=str(out), snapshots=True, **kw)
    return LongRun(run_evolution(config))


@pytest.fixture(scope="session")
def feed_forward_run(tmp_path_factory):
    return _long_run(tmp_path_factory, "feed_forward")


@pytest.fixture(scope="session")
def markov_run(tmp_path_factory):
    return _long_run(tmp_path_factory, "markov")
