"""Single-precision Gaussian baseline sampler.

Identical model with the mixture collapsed to one component: a lone
precision with a conjugate gamma update, and the shared conditionals for
coefficients, initial condition, and future states with the allocation
pinned to 1.  Exists to expose what misspecified Gaussian noise does to
the reconstruction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import conditionals as cond
from .conditionals import PriorSpec
from .dynamics import PolynomialMap, TimeSeriesDataset
from .gsbr import _forward_future, least_squares_theta
from .trace import ChainTrace, TraceRecorder


@dataclass
class ParamState:
    theta: np.ndarray
    x0: float
    lam: float
    future: np.ndarray


def run_param(
    dataset: TimeSeriesDataset,
    prior: PriorSpec,
    T: int,
    iterations: int,
    burn: int,
    thin: int = 1,
    rng: np.random.Generator | int | None = 0,
    degree: int = 5,
) -> ChainTrace:
    """Run the Gaussian-noise sampler; the mix column holds the precision."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n = dataset.n
    n_T = n + T

    theta = least_squares_theta(dataset.observations, degree, prior.M)
    x0 = float(rng.uniform(-prior.M0, prior.M0))
    lam = float(cond.gamma_positive(rng, prior.a, prior.b))
    bound = min(prior.M0, 3.0 * max(1.0, float(np.abs(dataset.observations).max())))
    future = _forward_future(theta, float(dataset.observations[-1]), T, bound)

    rec = TraceRecorder(iterations, burn, thin, degree, T)
    rejections = {"x0": 0, "future": 0, "theta": 0}

    x_aug = np.empty(n_T + 1)
    x_aug[0] = x0
    x_aug[1 : n + 1] = dataset.observations
    x_aug[n + 1 :] = future

    ones = np.ones(n_T, dtype=np.int64)
    t_start = time.perf_counter()
    for it in range(1, iterations + 1):
        pmap = PolynomialMap(tuple(theta))
        h = cond.residual_vector(pmap, x_aug)

        lam = float(
            cond.gamma_positive(rng, prior.a + 0.5 * n_T, prior.b + 0.5 * h.sum())
        )
        lam_obs = np.full(n_T, lam)

        rej0, rejf = cond.sample_states(x_aug, pmap, lam_obs, n, T, prior.M0, rng)
        rejections["x0"] += rej0
        rejections["future"] += rejf
        x0 = float(x_aug[0])

        theta, rej = cond.sample_theta(theta, x_aug, lam_obs, prior.M, rng)
        rejections["theta"] += rej

        z_pred = float(rng.normal(0.0, 1.0 / np.sqrt(lam)))

        rec.offer(it, theta, x0, lam, x_aug[n + 1 :], z_pred, 1, 1)
    elapsed = time.perf_counter() - t_start

    meta = {
        "T": T,
        "degree": degree,
        "n": n,
        "prior": prior.__dict__,
        "wall_seconds": elapsed,
        "seconds_per_1k_iterations": elapsed / iterations * 1000.0,
    }
    return rec.finish("param", "lambda", rejections, meta)
