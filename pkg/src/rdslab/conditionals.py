"""Full-conditional updates shared by the three Gibbs drivers.

Everything here operates on the augmented series
``x_aug = [x_0, x_1..x_n, x_{n+1}..x_{n+T}]`` with 1-based observation
indices i = 1..n_T (n_T = n + T) and 1-based mixture components.  The
nonstandard conditionals (coefficients, initial condition, interior
future states, geometric probability) are sampled exactly through
auxiliary-variable schemes that reduce each draw to truncated
exponentials and uniforms over interval unions, avoiding any
Metropolis step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import polyalg
from .dynamics import PolynomialMap
from .polyalg import EmptySupportError


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters shared by the samplers.

    ``alpha, beta`` parameterize the prior on the mixing weight parameter
    (geometric probability p, or DP concentration c); ``a, b`` are the
    shape/rate of the gamma base measure on precisions; ``M`` and ``M0``
    are the half-widths of the uniform boxes on coefficients and the
    initial condition.
    """

    alpha: float = 0.3
    beta: float = 0.3
    a: float = 1e-3
    b: float = 1e-3
    M: float = 10.0
    M0: float = 10.0
    p_prior: str = "transformed_gamma"

    def __post_init__(self):
        for name in ("alpha", "beta", "a", "b", "M", "M0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.p_prior not in ("transformed_gamma", "beta_conjugate"):
            raise ValueError(f"unknown p_prior {self.p_prior!r}")

    @classmethod
    def noninformative(cls) -> "PriorSpec":
        """Flat-ish reconstruction/prediction setup."""
        return cls(alpha=0.3, beta=0.3, a=1e-3, b=1e-3, M=10.0, M0=10.0)

    @classmethod
    def informative(cls) -> "PriorSpec":
        """Setup favouring many active kernels (small p, large c)."""
        return cls(alpha=3.0, beta=0.3, a=1.0, b=1e-3, M=10.0, M0=10.0)


# ---------------------------------------------------------------------------
# Elementary pieces
# ---------------------------------------------------------------------------


def h_residual(pmap: PolynomialMap, x_curr: float, x_prev: float) -> float:
    """Squared one-step residual (x_curr - g(x_prev))^2."""
    r = x_curr - pmap(x_prev)
    return r * r


def residual_vector(pmap: PolynomialMap, x_aug: np.ndarray) -> np.ndarray:
    """h_i for i = 1..n_T, vectorised."""
    r = x_aug[1:] - pmap(x_aug[:-1])
    return r * r


def trunc_exp(rate: float, lower: float, rng: np.random.Generator, size=None):
    """Exponential(rate) truncated to (lower, inf), by inverse CDF."""
    u = rng.random(size)
    return lower - np.log1p(-u) / rate


def gamma_positive(rng: np.random.Generator, shape, rate):
    """Gamma draw floored away from zero.

    Tiny shapes (diffuse base measures like a = 1e-3) underflow to 0.0
    regularly; the floor keeps every precision strictly positive.
    """
    return np.maximum(rng.gamma(shape, 1.0 / np.asarray(rate)), 1e-300)


def draw_p_prior(prior: PriorSpec, rng: np.random.Generator) -> float:
    """Draw p from its prior (transformed gamma via p = 1/(1+c), or beta)."""
    if prior.p_prior == "beta_conjugate":
        return float(rng.beta(prior.alpha, prior.beta))
    c = rng.gamma(prior.alpha, 1.0 / prior.beta)
    return 1.0 / (1.0 + c)


# ---------------------------------------------------------------------------
# Precisions and allocations
# ---------------------------------------------------------------------------


def update_precisions(
    h: np.ndarray,
    d: np.ndarray,
    n_components: int,
    prior: PriorSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Conjugate gamma draw of every component precision.

    Component j gets shape a + count_j/2 and rate b + sum(h over i with
    d_i = j)/2; components holding no observations reduce to the prior.
    """
    d = np.asarray(d)
    if d.size and int(d.max()) > n_components:
        raise ValueError("allocation exceeds component count")
    counts = np.bincount(d, minlength=n_components + 1)[1 : n_components + 1]
    hsums = np.bincount(d, weights=h, minlength=n_components + 1)[1 : n_components + 1]
    shape = prior.a + 0.5 * counts
    rate = prior.b + 0.5 * hsums
    return gamma_positive(rng, shape, rate)


def _categorical_rows(logw: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row-wise categorical draws from unnormalised log-weights.

    Rows whose weights all underflow (no finite entry) fall back to the
    argmax of the log-weights.
    """
    m = logw.max(axis=1, keepdims=True)
    finite = np.isfinite(m[:, 0])
    with np.errstate(invalid="ignore"):
        w = np.exp(logw - np.where(np.isfinite(m), m, 0.0))
    w[~np.isfinite(w)] = 0.0
    cum = np.cumsum(w, axis=1)
    total = cum[:, -1]
    u = rng.random(logw.shape[0]) * total
    idx = (cum < u[:, None]).sum(axis=1)
    fallback = logw.argmax(axis=1)
    idx = np.where(finite & (total > 0), idx, fallback)
    return idx.astype(np.int64) + 1


def sample_allocation_gsb(
    x_i: float,
    x_prev: float,
    pmap: PolynomialMap,
    lambdas: np.ndarray,
    N_i: int,
    rng: np.random.Generator,
) -> int:
    """Allocation d_i over components 1..N_i, kernel-weighted.

    P(d_i = j) is proportional to sqrt(lambda_j) exp(-lambda_j h/2);
    computed in log space, with an argmax fallback on total underflow.
    """
    if N_i < 1 or len(lambdas) < N_i:
        raise ValueError("need N_i >= 1 and enough precisions")
    h = h_residual(pmap, x_i, x_prev)
    lam = np.asarray(lambdas[:N_i])
    logw = 0.5 * np.log(lam) - 0.5 * lam * h
    return int(_categorical_rows(logw[None, :], rng)[0])


def sample_allocations_gsb(
    h: np.ndarray, N: np.ndarray, lambdas: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Vectorised allocation sweep for all observations at once."""
    lam = np.asarray(lambdas)
    logw = 0.5 * np.log(lam)[None, :] - 0.5 * h[:, None] * lam[None, :]
    cols = np.arange(1, lam.size + 1)
    logw = np.where(cols[None, :] <= N[:, None], logw, -np.inf)
    return _categorical_rows(logw, rng)


def sample_slice_N(d_i: int, p: float, rng: np.random.Generator) -> int:
    """Slice bound N_i = d_i + G with G geometric(p) on {0, 1, ...}."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if d_i < 1:
        raise ValueError("d_i must be >= 1")
    return d_i + int(rng.geometric(p)) - 1


def sample_slice_Ns(d: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Vectorised slice-bound sweep."""
    return d + rng.geometric(p, size=d.shape) - 1


# ---------------------------------------------------------------------------
# Coefficients (embedded slice scheme per coordinate)
# ---------------------------------------------------------------------------


def theta_conditional_params(
    j: int, theta: np.ndarray, X: np.ndarray, x_out: np.ndarray, lam_obs: np.ndarray
) -> tuple[float, float]:
    """Precision tau_j and mean mu_j of the coefficient-j full conditional.

    xi_i = x_i - sum_{k != j} theta_k x_{i-1}^k, tau_j = sum lam_i x_{i-1}^{2j},
    mu_j = sum(lam_i xi_i x_{i-1}^j) / tau_j.
    """
    xj = X[:, j]
    tau = float(np.dot(lam_obs, xj * xj))
    if tau <= 0.0:
        return 0.0, 0.0
    xi = x_out - X @ theta + theta[j] * xj
    mu = float(np.dot(lam_obs, xi * xj) / tau)
    return tau, mu


def embedded_theta_step(
    theta_j: float, mu: float, tau: float, lo: float, hi: float, rng: np.random.Generator
) -> tuple[float, bool]:
    """One auxiliary-variable move targeting N(mu, 1/tau) truncated to (lo, hi).

    Draws the slice height as a shifted exponential above (theta_j - mu)^2,
    then a uniform over the slice intersected with the box.  Returns the new
    value and whether the draw had to be rejected (empty numeric support).
    """
    t = (theta_j - mu) ** 2
    aux = trunc_exp(tau / 2.0, t, rng)
    half = math.sqrt(aux)
    a = max(lo, mu - half)
    b = min(hi, mu + half)
    if not a < b:
        return theta_j, True
    return float(rng.uniform(a, b)), False


def sample_theta(
    theta: np.ndarray,
    x_aug: np.ndarray,
    lam_obs: np.ndarray,
    M: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """One full sweep over all coefficients, ascending index.

    Each coordinate follows the embedded scheme; a coordinate with zero
    conditional precision (every allocated predecessor is a root of x^j)
    falls back to a prior draw on (-M, M).  Returns the updated vector and
    the number of empty-support rejections.
    """
    theta = np.array(theta, dtype=float)
    x_in = x_aug[:-1]
    x_out = x_aug[1:]
    mp1 = theta.size
    X = np.vander(x_in, mp1, increasing=True)
    rejections = 0
    for j in range(mp1):
        tau, mu = theta_conditional_params(j, theta, X, x_out, lam_obs)
        if tau <= 0.0:
            theta[j] = rng.uniform(-M, M)
            continue
        theta[j], rejected = embedded_theta_step(theta[j], mu, tau, -M, M, rng)
        rejections += rejected
    return theta, rejections


# ---------------------------------------------------------------------------
# Initial condition and future states
# ---------------------------------------------------------------------------


def sample_x0(
    x0: float,
    x1: float,
    pmap: PolynomialMap,
    lam_d1: float,
    M0: float,
    rng: np.random.Generator,
) -> tuple[float, bool]:
    """Embedded draw of the initial condition.

    The slice height above the squared residual of (x1, x0) defines the
    band (x1 -+ sqrt(height)); the new x0 is uniform over the preimage set
    {x : g(x) in band} clipped to the prior box.  Exact arithmetic keeps
    the current x0 inside that set, so emptiness marks numerical boundary
    loss and retains the current value.
    """
    h = h_residual(pmap, x1, x0)
    height = float(trunc_exp(lam_d1 / 2.0, h, rng))
    if not math.isfinite(height):
        return x0, True
    half = math.sqrt(height)
    region = polyalg.region_Rg(pmap, x1 - half, x1 + half)
    support = polyalg.intersect_box(region, -M0, M0)
    if support.is_empty:
        return x0, True
    try:
        return polyalg.sample_uniform(support, rng), False
    except EmptySupportError:
        return x0, True


def trunc_normal_box(
    mean: float, sd: float, lo: float, hi: float, rng: np.random.Generator
) -> float:
    """Normal(mean, sd) truncated to (lo, hi).

    Plain rejection covers the common case (most mass inside); the
    far-tail case falls back to inverse-CDF via the normal CDF, and when
    even that underflows the conditional is effectively uniform-at-the-
    boundary, approximated by the nearest edge.
    """
    for _ in range(32):
        x = rng.normal(mean, sd)
        if lo < x < hi:
            return float(x)
    from scipy.stats import truncnorm

    a, b = (lo - mean) / sd, (hi - mean) / sd
    x = float(truncnorm.ppf(rng.random(), a, b, loc=mean, scale=sd))
    if not (lo < x < hi) or not math.isfinite(x):
        x = lo if mean < lo else hi
        x = x + (1e-12 if x == lo else -1e-12) * max(1.0, abs(x))
    return float(x)


def sample_future(
    x_aug: np.ndarray,
    pmap: PolynomialMap,
    lam_obs: np.ndarray,
    n: int,
    T: int,
    rng: np.random.Generator,
    x_bound: float = 10.0,
) -> int:
    """Update the T future states in place; returns the rejection count.

    Interior states j = 1..T-1 get the two-auxiliary treatment: one slice
    height against the preceding residual (box around g of the previous
    state) and one against the following residual (preimage band under g).
    The boundary polynomials for all interior states share pre-sweep
    quantities, so their real roots are extracted in a single batched
    solve.  The terminal state is a normal draw.

    All future states are confined to the compact state-space box
    (-x_bound, x_bound) -- the same box the initial condition lives in.
    The unconfined conditionals put vanishing mass outside it but admit a
    numerical funnel (terminal state against its own precision) that can
    freeze the chain at astronomical magnitudes.
    """
    if T == 0:
        return 0
    rejections = 0
    coeffs = np.asarray(pmap.coefficients)
    if T >= 2:
        js = np.arange(1, T)
        x_next = x_aug[n + js + 1]  # pre-sweep values of x_{n+j+1}
        x_self = x_aug[n + js]
        lam_next = lam_obs[n + js]  # precision of observation n+j+1
        res = x_next - pmap(x_self)
        heights = trunc_exp(lam_next / 2.0, res * res, rng)
        usable = np.isfinite(heights)
        heights = np.where(usable, heights, 0.0)
        halves = np.sqrt(heights)
        band_lo = x_next - halves
        band_hi = x_next + halves

        batch = np.tile(coeffs, (2 * (T - 1), 1))
        batch[0::2, 0] -= band_lo
        batch[1::2, 0] -= band_hi
        roots, counts = polyalg.roots_batch(batch)

        for k, j in enumerate(js):
            if not usable[k]:
                rejections += 1
                continue
            lam_own = lam_obs[n + j - 1]
            g_prev = pmap(x_aug[n + j - 1])
            r_own = x_aug[n + j] - g_prev
            height = float(trunc_exp(lam_own / 2.0, r_own * r_own, rng))
            if not math.isfinite(height):
                rejections += 1
                continue
            half = math.sqrt(height)

            b = np.sort(
                np.concatenate(
                    [roots[2 * k, : counts[2 * k]], roots[2 * k + 1, : counts[2 * k + 1]]]
                )
            )
            cells = polyalg._select_cells(b, coeffs, band_lo[k], band_hi[k])
            lo = max(g_prev - half, -x_bound)
            hi = min(g_prev + half, x_bound)
            support = polyalg._clip_cells(cells, lo, hi) if lo < hi else []
            if not support:
                rejections += 1
                continue
            try:
                x_aug[n + j] = polyalg._sample_cells(support, rng)
            except EmptySupportError:
                rejections += 1

    lam_T = lam_obs[n + T - 1]
    mean_T = pmap(x_aug[n + T - 1])
    sd_T = 1.0 / math.sqrt(lam_T)
    if math.isfinite(mean_T) and math.isfinite(sd_T):
        x_aug[n + T] = trunc_normal_box(mean_T, sd_T, -x_bound, x_bound, rng)
    else:
        rejections += 1
    return rejections


# ---------------------------------------------------------------------------
# Geometric probability p
# ---------------------------------------------------------------------------


def sample_power_density(
    k: float, lo: float, hi: float, rng: np.random.Generator
) -> float:
    """Inverse-CDF draw from the density proportional to p^k on (lo, hi).

    Implemented in log space so that huge exponents (k ~ 2 n_T) neither
    overflow nor flush the CDF to zero.
    """
    if not 0.0 <= lo < hi:
        raise ValueError("need 0 <= lo < hi")
    kp1 = k + 1.0
    u = rng.random()
    if kp1 == 0.0:
        if lo <= 0.0:
            raise ValueError("log-uniform density needs lo > 0")
        return float(math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo))))
    la = kp1 * (math.log(lo) if lo > 0 else -math.inf)
    lb = kp1 * math.log(hi)
    m = max(la, lb)
    va = math.exp(la - m) if math.isfinite(la) else 0.0
    vb = math.exp(lb - m)
    v = va + u * (vb - va)
    if v <= 0.0:
        return lo if kp1 < 0 else hi
    return float(math.exp((m + math.log(v)) / kp1))


def sample_states(
    x_aug: np.ndarray,
    pmap: PolynomialMap,
    lam_obs: np.ndarray,
    n: int,
    T: int,
    M0: float,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """Driver-facing combined update of x0 and the future states.

    Mathematically identical to sample_x0 followed by sample_future (the
    two blocks are conditionally independent given everything else), but
    all boundary polynomials go through a single batched root solve.
    Updates x_aug in place; returns (x0_rejections, future_rejections).
    """
    coeffs = np.asarray(pmap.coefficients)
    n_interior = T - 1 if T >= 2 else 0
    rej_x0 = 0
    rej_future = 0

    # auxiliary slice heights from the pre-update state
    h0 = h_residual(pmap, x_aug[1], x_aug[0])
    height0 = float(trunc_exp(lam_obs[0] / 2.0, h0, rng))
    if n_interior:
        js = np.arange(1, T)
        x_next = x_aug[n + js + 1]
        res = x_next - pmap(x_aug[n + js])
        heights = trunc_exp(lam_obs[n + js] / 2.0, res * res, rng)
        usable = np.isfinite(heights)
        heights = np.where(usable, heights, 0.0)
        halves = np.sqrt(heights)
        band_lo = x_next - halves
        band_hi = x_next + halves

    rows = 2 + 2 * n_interior
    batch = np.tile(coeffs, (rows, 1))
    if math.isfinite(height0):
        half0 = math.sqrt(height0)
        batch[0, 0] -= x_aug[1] - half0
        batch[1, 0] -= x_aug[1] + half0
    if n_interior:
        batch[2::2, 0] -= band_lo
        batch[3::2, 0] -= band_hi
    roots, counts = polyalg.roots_batch(batch)

    # x0 over its preimage band clipped to the prior box
    if math.isfinite(height0):
        b = np.sort(np.concatenate([roots[0, : counts[0]], roots[1, : counts[1]]]))
        cells = polyalg._select_cells(
            b, coeffs, x_aug[1] - half0, x_aug[1] + half0
        )
        support = polyalg._clip_cells(cells, -M0, M0)
        if support:
            try:
                x_aug[0] = polyalg._sample_cells(support, rng)
            except EmptySupportError:
                rej_x0 = 1
        else:
            rej_x0 = 1
    else:
        rej_x0 = 1

    if T == 0:
        return rej_x0, 0

    u_own = rng.random(n_interior) if n_interior else None
    for k in range(n_interior):
        j = k + 1
        if not usable[k]:
            rej_future += 1
            continue
        lam_own = lam_obs[n + j - 1]
        g_prev = pmap(x_aug[n + j - 1])
        r_own = x_aug[n + j] - g_prev
        height = r_own * r_own - math.log1p(-u_own[k]) * 2.0 / lam_own
        if not math.isfinite(height):
            rej_future += 1
            continue
        half = math.sqrt(height)
        b = np.sort(
            np.concatenate(
                [roots[2 * k + 2, : counts[2 * k + 2]], roots[2 * k + 3, : counts[2 * k + 3]]]
            )
        )
        cells = polyalg._select_cells(b, coeffs, band_lo[k], band_hi[k])
        lo = max(g_prev - half, -M0)
        hi = min(g_prev + half, M0)
        support = polyalg._clip_cells(cells, lo, hi) if lo < hi else []
        if not support:
            rej_future += 1
            continue
        try:
            x_aug[n + j] = polyalg._sample_cells(support, rng)
        except EmptySupportError:
            rej_future += 1

    lam_T = lam_obs[n + T - 1]
    mean_T = pmap(x_aug[n + T - 1])
    sd_T = 1.0 / math.sqrt(lam_T)
    if math.isfinite(mean_T) and math.isfinite(sd_T):
        x_aug[n + T] = trunc_normal_box(mean_T, sd_T, -M0, M0, rng)
    else:
        rej_future += 1
    return rej_x0, rej_future


def sample_p(
    p: float,
    N: np.ndarray,
    n_T: int,
    prior: PriorSpec,
    rng: np.random.Generator,
) -> tuple[float, bool]:
    """Update the geometric probability under its transformed-gamma prior.

    Two uniform auxiliaries strip the (1-p)^L and exp(-beta/p) factors,
    leaving a power density p^(2 n_T - alpha - 1) on an interval whose
    endpoints depend on the sign of L = alpha + sum(N) - n_T - 1.
    """
    if prior.p_prior != "transformed_gamma":
        raise ValueError("sample_p requires the transformed_gamma prior")
    L = prior.alpha + float(np.sum(N)) - n_T - 1.0
    log1mp = math.log1p(-p)
    # p1 ~ U(0, (1-p)^L), p2 ~ U(0, exp(-beta/p)), kept in logs
    log_p1 = math.log(rng.random()) + L * log1mp
    log_p2 = math.log(rng.random()) - prior.beta / p

    lb = prior.beta / (-log_p2)
    if L > 0.0:
        ub = 1.0 - math.exp(log_p1 / L)
    elif L == 0.0:
        ub = 1.0
    else:
        lb = max(lb, 1.0 - math.exp(log_p1 / L))
        ub = 1.0
    if not lb < ub:
        return p, True
    k = 2.0 * n_T - prior.alpha - 1.0
    new = sample_power_density(k, lb, ub, rng)
    new = min(max(new, 1e-15), 1.0 - 1e-15)
    return new, False


def sample_p_beta(
    N: np.ndarray, n_T: int, alpha: float, beta: float, rng: np.random.Generator
) -> float:
    """Conjugate update of p under a beta prior.

    The likelihood contributes p^2 (1-p)^(N_i - 1) per observation, so the
    posterior is Beta(alpha + 2 n_T, beta + sum(N) - n_T).
    """
    return float(rng.beta(alpha + 2.0 * n_T, beta + float(np.sum(N)) - n_T))


# ---------------------------------------------------------------------------
# Noise predictive
# ---------------------------------------------------------------------------


def geometric_weights(p: float, count: int) -> np.ndarray:
    """First ``count`` geometric weights p (1-p)^(j-1)."""
    j = np.arange(count)
    return p * (1.0 - p) ** j


def sample_noise_predictive(
    p: float, lambdas: np.ndarray, prior: PriorSpec, rng: np.random.Generator
) -> float:
    """One draw from the mixture predictive of the next noise increment.

    Selects a represented precision with geometric weight, or a fresh
    prior precision with the leftover tail mass, then draws the normal.
    """
    lam = np.asarray(lambdas)
    w = geometric_weights(p, lam.size)
    rho = rng.random()
    cum = np.cumsum(w)
    if rho <= cum[-1]:
        j = int(np.searchsorted(cum, rho))
        lam_j = lam[min(j, lam.size - 1)]
    else:
        lam_j = float(gamma_positive(rng, prior.a, prior.b))
    return float(rng.normal(0.0, 1.0 / math.sqrt(lam_j)))
