"""Feed-forward discrete-time quantum walk, its Markov limit, and PME oracles."""

__version__ = "0.1.0"

from .analysis import (QGaussianFit, ScalingSeries, SpectrumResult, estimate_exponent,
                       estimate_q_two_times, fit_q_gaussian, q_gaussian, residual_spectrum,
                       running_average)
from .distribution import Distribution
from .errors import FFQWalkError
from .markov import MarkovState, evolve_markov, markov_distribution, markov_step
from .pme import PMEGrid, barenblatt_profile, nlpde_step, pme_step
from .walk import (CoinAngle, StepDecomposition, WalkerState, decompose_step, evolve,
                   feed_forward_step, homogeneous_step, probability_distribution, rate_function)

__all__ = [
    "CoinAngle", "Distribution", "FFQWalkError", "MarkovState", "PMEGrid", "QGaussianFit",
    "ScalingSeries", "SpectrumResult", "StepDecomposition", "WalkerState",
    "barenblatt_profile", "decompose_step", "estimate_exponent", "estimate_q_two_times",
    "evolve", "evolve_markov", "feed_forward_step", "fit_q_gaussian", "homogeneous_step",
    "markov_distribution", "markov_step", "nlpde_step", "pme_step", "probability_distribution",
    "q_gaussian", "rate_function", "residual_spectrum", "running_average",
]
