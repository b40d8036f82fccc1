"""Reconstruction and prediction of noisy polynomial dynamical systems.

Given a short time series from a polynomial recurrence perturbed by
additive non-Gaussian noise, the samplers here recover the drift
coefficients, the initial condition, and the noise density, and jointly
predict future states.  The main sampler models the noise as an infinite
normal mixture with geometric stick-breaking weights; a slice-sampled
Dirichlet-process mixture and a plain Gaussian sampler serve as
comparisons.  A simulation/diagnostics layer generates the benchmark
chaotic datasets and scores the results.
"""

from .analysis import EstimatorConfig
from .conditionals import PriorSpec
from .dynamics import (
    EmpiricalDensity,
    GaussianMixtureNoise,
    PolynomialMap,
    TimeSeriesDataset,
    cubic_map,
    generate_series,
    logistic_map,
    noise_f1,
    noise_f2,
)
from .gsbr import run_gsbr
from .parametric import run_param
from .rdpr import run_rdpr
from .trace import ChainTrace

__version__ = "0.1.0"

__all__ = [
    "ChainTrace",
    "EmpiricalDensity",
    "EstimatorConfig",
    "GaussianMixtureNoise",
    "PolynomialMap",
    "PriorSpec",
    "TimeSeriesDataset",
    "cubic_map",
    "generate_series",
    "logistic_map",
    "noise_f1",
    "noise_f2",
    "run_gsbr",
    "run_param",
    "run_rdpr",
]
