"""Gibbs driver for the slice-sampled Dirichlet-process mixture competitor.

Two infinite-dimensional parameters (stick weights and precision
locations) plus a random concentration mass c.  Slice variables keep the
per-observation component sets finite; the stick vector is extended with
prior draws until the leftover mass drops below the smallest slice.
Coefficients, initial condition, precisions, and future states reuse the
shared conditionals, so the two nonparametric samplers differ only in
their mixing-measure machinery.
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

#: Hard cap on stick extension; exceeding it indicates numerical breakdown.
MAX_COMPONENTS = 10_000


@dataclass
class RdprState:
    theta: np.ndarray
    x0: float
    c: float
    sticks: np.ndarray  # beta variables z_1..z_K
    weights: np.ndarray  # derived stick-breaking weights
    lambdas: np.ndarray  # precisions, length K
    d: np.ndarray
    u: np.ndarray
    future: np.ndarray
    z_pred: float = 0.0


def stick_weights(sticks: np.ndarray) -> np.ndarray:
    """w_j = z_j * prod_{s<j} (1 - z_s)."""
    if sticks.size == 0:
        return sticks.copy()
    tail = np.cumprod(1.0 - sticks)
    return sticks * np.concatenate(([1.0], tail[:-1]))


def sample_sticks(
    d: np.ndarray, c: float, K: int, rng: np.random.Generator
) -> np.ndarray:
    """Posterior beta draws z_j ~ Be(1 + n_j, c + n_{>j}) for j = 1..K."""
    if K < int(d.max()) if d.size else K < 1:
        raise ValueError("K must cover every allocation")
    counts = np.bincount(d, minlength=K + 1)[1 : K + 1]
    greater = counts[::-1].cumsum()[::-1] - counts
    return rng.beta(1.0 + counts, c + greater)


def sample_slice_u(
    d: np.ndarray,
    sticks: np.ndarray,
    lambdas: np.ndarray,
    c: float,
    prior: PriorSpec,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Slice variables u_i ~ U(0, w_{d_i}), extending the sticks as needed.

    New sticks (and matching prior precisions) are appended until the
    undistributed mass prod(1 - z_j) drops below min(u), which guarantees
    every slice set {j : w_j > u_i} is fully contained in 1..K.

    Returns (u, sticks, lambdas) with the possibly extended arrays.
    """
    w = stick_weights(sticks)
    u = rng.uniform(0.0, w[d - 1])
    u_min = float(u.min())
    leftover = float(np.prod(1.0 - sticks))
    z_list, lam_list = list(sticks), list(lambdas)
    while leftover >= u_min:
        if len(z_list) >= MAX_COMPONENTS:
            raise RuntimeError(
                f"stick extension exceeded {MAX_COMPONENTS} components"
            )
        z_new = rng.beta(1.0, c)
        z_list.append(z_new)
        lam_list.append(float(cond.gamma_positive(rng, prior.a, prior.b)))
        leftover *= 1.0 - z_new
    return u, np.array(z_list), np.array(lam_list)


def sample_allocation_dp(
    x_i: float,
    x_prev: float,
    pmap: PolynomialMap,
    lambdas: np.ndarray,
    weights: np.ndarray,
    u_i: float,
    rng: np.random.Generator,
) -> int:
    """Allocation over the slice set {j : w_j > u_i}, kernel-weighted."""
    mask = weights > u_i
    if not mask.any():
        raise ValueError("empty slice set; extend the sticks first")
    h = cond.h_residual(pmap, x_i, x_prev)
    lam = np.asarray(lambdas)
    logw = np.where(mask, 0.5 * np.log(lam) - 0.5 * lam * h, -np.inf)
    return int(cond._categorical_rows(logw[None, :], rng)[0])


def _sample_allocations_dp(
    h: np.ndarray,
    lambdas: np.ndarray,
    weights: np.ndarray,
    u: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    lam = np.asarray(lambdas)
    logk = 0.5 * np.log(lam)[None, :] - 0.5 * h[:, None] * lam[None, :]
    logw = np.where(weights[None, :] > u[:, None], logk, -np.inf)
    return cond._categorical_rows(logw, rng)


def update_concentration(
    c: float,
    k_distinct: int,
    n_T: int,
    alpha: float,
    beta: float,
    rng: np.random.Generator,
) -> float:
    """Auxiliary-variable update of c under a Gamma(alpha, beta) prior.

    Draws eta ~ Be(c+1, n_T), then c from the two-gamma mixture whose
    weights depend on (alpha, beta, k_distinct, n_T, eta).
    """
    if k_distinct < 1:
        raise ValueError("k_distinct must be >= 1")
    if n_T == 0:
        return float(rng.gamma(alpha, 1.0 / beta))
    eta = rng.beta(c + 1.0, n_T)
    rate = beta - np.log(eta)
    odds = (alpha + k_distinct - 1.0) / (n_T * rate)
    shape = alpha + k_distinct
    if rng.random() >= odds / (1.0 + odds):
        shape -= 1.0
    return float(max(rng.gamma(shape, 1.0 / rate), 1e-12))


def run_rdpr(
    dataset: TimeSeriesDataset,
    prior: PriorSpec,
    T: int,
    iterations: int,
    burn: int,
    thin: int = 1,
    rng: np.random.Generator | int | None = 0,
    degree: int = 5,
) -> ChainTrace:
    """Run the slice-DP sampler; trace schema matches the others with the
    mix column holding the concentration c."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n = dataset.n
    n_T = n + T

    theta = least_squares_theta(dataset.observations, degree, prior.M)
    x0 = float(rng.uniform(-prior.M0, prior.M0))
    c = float(rng.gamma(prior.alpha, 1.0 / prior.beta))
    sticks = np.array([rng.beta(1.0, c)])
    lambdas = np.atleast_1d(cond.gamma_positive(rng, prior.a, prior.b))
    d = np.ones(n_T, dtype=np.int64)
    bound = min(prior.M0, 3.0 * max(1.0, float(np.abs(dataset.observations).max())))
    future = _forward_future(theta, float(dataset.observations[-1]), T, bound)

    rec = TraceRecorder(iterations, burn, thin, degree, T)
    rejections = {"x0": 0, "future": 0, "theta": 0}

    x_aug = np.empty(n_T + 1)
    x_aug[0] = x0
    x_aug[1 : n + 1] = dataset.observations
    x_aug[n + 1 :] = future

    t_start = time.perf_counter()
    for it in range(1, iterations + 1):
        pmap = PolynomialMap(tuple(theta))
        h = cond.residual_vector(pmap, x_aug)

        # trim inactive tail components, then refresh sticks posterior-wise
        K = int(d.max())
        sticks = sample_sticks(d, c, K, rng)
        lambdas = lambdas[:K]

        u, sticks, lambdas = sample_slice_u(d, sticks, lambdas, c, prior, rng)
        weights = stick_weights(sticks)
        d = _sample_allocations_dp(h, lambdas, weights, u, rng)

        lambdas = cond.update_precisions(h, d, lambdas.size, prior, rng)

        lam_obs = lambdas[d - 1]
        rej0, rejf = cond.sample_states(x_aug, pmap, lam_obs, n, T, prior.M0, rng)
        rejections["x0"] += rej0
        rejections["future"] += rejf
        x0 = float(x_aug[0])

        theta, rej = cond.sample_theta(theta, x_aug, lam_obs, prior.M, rng)
        rejections["theta"] += rej

        c = update_concentration(
            c, np.unique(d).size, n_T, prior.alpha, prior.beta, rng
        )

        # noise predictive from the current sticks; leftover mass -> prior
        rho = rng.random()
        cum = np.cumsum(weights)
        if rho <= cum[-1]:
            lam_j = lambdas[min(int(np.searchsorted(cum, rho)), lambdas.size - 1)]
        else:
            lam_j = float(cond.gamma_positive(rng, prior.a, prior.b))
        z_pred = float(rng.normal(0.0, 1.0 / np.sqrt(lam_j)))

        rec.offer(
            it, theta, x0, c, x_aug[n + 1 :], z_pred, int(sticks.size), int(d.max())
        )
    elapsed = time.perf_counter() - t_start

    meta = {
        "T": T,
        "degree": degree,
        "n": n,
        "prior": prior.__dict__,
        "wall_seconds": elapsed,
        "seconds_per_1k_iterations": elapsed / iterations * 1000.0,
    }
    return rec.finish("rdpr", "c", rejections, meta)
