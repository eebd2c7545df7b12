"""Bayesian nonparametric estimation of monotone non-increasing Poisson intensities.

Dirichlet process mixtures of uniform kernels fitted by a slice Gibbs sampler,
with data-driven, fixed and hierarchical calibration of the base measure, plus
a Gaussian location-mixture density estimator.
"""

__version__ = "0.1.0"

from .base_measures import BaseMeasure, Family, psi_transform
from .calibration import (CalibrationError, gamma_fixed, gamma_hat, gamma_star,
                          hierarchical_prior, psi, psi_inverse)
from .gibbs import ChainConfig, ChainError, ChainTrace, HyperState, Strategy, run_chain
from .intensities import TruthId, e_theo, eval_truth, mass, truth
from .mixture import GridFunction, MixtureState, sample_prior
from .point_process import (IngestionError, PointProcessSample, load_events, save_events,
                            simulate)
from .summaries import Metric, distance, summarize

__all__ = [
    "BaseMeasure", "Family", "psi_transform",
    "CalibrationError", "gamma_fixed", "gamma_hat", "gamma_star", "hierarchical_prior",
    "psi", "psi_inverse",
    "ChainConfig", "ChainError", "ChainTrace", "HyperState", "Strategy", "run_chain",
    "TruthId", "e_theo", "eval_truth", "mass", "truth",
    "GridFunction", "MixtureState", "sample_prior",
    "IngestionError", "PointProcessSample", "load_events", "save_events", "simulate",
    "Metric", "distance", "summarize",
]
