"""Forward simulation of randomly perturbed polynomial maps.

Covers the generating side of the problem: polynomial maps, zero-mean
Gaussian-mixture dynamical noise, orbit generation with an escape guard,
Liapunov exponents, the invariant interval of the doubly composed map, and
histogram estimates of the quasi-invariant (escape-conditioned) measure.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .polyalg import DegeneratePolynomialError, real_roots

#: Orbits whose magnitude exceeds this are treated as escaped to infinity.
ESCAPE_GUARD = 1.0e6

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class OrbitEscapeError(RuntimeError):
    """Orbit magnitude crossed the escape guard."""

    def __init__(self, index: int, value: float, guard: float = ESCAPE_GUARD):
        self.index = index
        self.value = value
        super().__init__(
            f"orbit escaped at index {index} (|x| = {abs(value):.3g} > {guard:.3g})"
        )


class NoInvariantIntervalError(ValueError):
    """The doubly composed map has fewer than two real fixed points."""


class NoiseTooStrongError(RuntimeError):
    """Escapes dominate the simulation; no quasi-invariant estimate."""


@dataclass(frozen=True)
class PolynomialMap:
    """Polynomial drift ``g(x) = sum_k theta_k x^k`` of a random recurrence.

    Trailing zero coefficients are trimmed; the trimmed degree must be at
    least one with a nonzero leading coefficient.
    """

    coefficients: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        while len(c) > 1 and c[-1] == 0.0:
            c = c[:-1]
        if len(c) < 2:
            raise ValueError("polynomial map must have degree >= 1")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        """Evaluate g at x (scalar or array) in Horner form."""
        if isinstance(x, (float, int)):
            out = 0.0
            for c in reversed(self.coefficients):
                out = out * x + c
            return out
        out = np.zeros_like(np.asarray(x, dtype=float))
        for c in reversed(self.coefficients):
            out = out * x + c
        return out if out.ndim else float(out)

    def derivative_at(self, x):
        """Evaluate g'(x); exact since g is polynomial."""
        if isinstance(x, (float, int)):
            out = 0.0
            for k in range(self.degree, 0, -1):
                out = out * x + k * self.coefficients[k]
            return out
        out = np.zeros_like(np.asarray(x, dtype=float))
        for k in range(self.degree, 0, -1):
            out = out * x + k * self.coefficients[k]
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class GaussianMixtureNoise:
    """Finite zero-mean normal mixture; components are (weight, variance)."""

    components: tuple[tuple[float, float], ...]

    def __post_init__(self):
        comps = tuple((float(w), float(v)) for w, v in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        wsum = sum(w for w, _ in comps)
        if abs(wsum - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {wsum!r}, not 1")
        if any(v <= 0.0 for _, v in comps):
            raise ValueError("every component variance must be positive")
        object.__setattr__(self, "components", comps)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def variances(self) -> np.ndarray:
        return np.array([v for _, v in self.components])

    def variance(self) -> float:
        """Total variance E z^2."""
        return float(np.dot(self.weights, self.variances))

    def pdf(self, z):
        """Mixture density, vectorised over z."""
        z = np.asarray(z, dtype=float)
        w, v = self.weights, self.variances
        dens = np.exp(-0.5 * z[..., None] ** 2 / v) / np.sqrt(2.0 * np.pi * v)
        return dens @ w

    def sample(self, rng: np.random.Generator) -> float:
        """One draw; consumes exactly one uniform and one normal variate."""
        u = rng.random()
        idx = int(np.searchsorted(np.cumsum(self.weights), u))
        idx = min(idx, len(self.components) - 1)
        return rng.normal(0.0, math.sqrt(self.components[idx][1]))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vectorised draws (stream layout differs from repeated sample())."""
        idx = rng.choice(len(self.components), size=size, p=self.weights)
        return rng.standard_normal(size) * np.sqrt(self.variances[idx])


@dataclass
class TimeSeriesDataset:
    """Observed series x_1..x_n plus generation metadata when synthetic."""

    observations: np.ndarray
    x0_true: float | None = None
    map_true: PolynomialMap | None = None
    noise_true: GaussianMixtureNoise | None = None
    seed: int | None = None
    future_truth: np.ndarray | None = None
    """Held-out continuation of the same realization, for out-of-sample scoring."""

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=float)
        if self.observations.size < 1:
            raise ValueError("dataset needs at least one observation")
        if self.future_truth is not None:
            self.future_truth = np.asarray(self.future_truth, dtype=float)

    @property
    def n(self) -> int:
        return int(self.observations.size)


@dataclass(frozen=True)
class EmpiricalDensity:
    """Histogram/grid density: mass values at grid points, uniform bin width."""

    grid: np.ndarray
    mass: np.ndarray
    bin_width: float

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "mass", np.asarray(self.mass, dtype=float))
        if self.grid.shape != self.mass.shape:
            raise ValueError("grid and mass must have the same shape")
        if np.any(self.mass < 0.0):
            raise ValueError("mass must be nonnegative")
        total = float(self.mass.sum() * self.bin_width)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"density integrates to {total!r}, not 1")


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def evaluate(pmap: PolynomialMap, x: float) -> float:
    """Drift value g(x)."""
    return pmap(x)


def sample_noise(noise: GaussianMixtureNoise, rng: np.random.Generator) -> float:
    """Single mixture draw: component by weight, then a zero-mean normal."""
    return noise.sample(rng)


def tail_fatness(noise: GaussianMixtureNoise) -> float:
    """E|z| / sqrt(E z^2), computed in closed form.

    For a zero-mean normal mixture, E|z| = sum_i w_i sigma_i sqrt(2/pi)
    and E z^2 = sum_i w_i sigma_i^2.  Values near 1 indicate thin tails.
    """
    w = noise.weights
    sig = np.sqrt(noise.variances)
    return float(_SQRT_2_OVER_PI * np.dot(w, sig) / math.sqrt(np.dot(w, sig**2)))


def generate_series(
    pmap: PolynomialMap,
    noise: GaussianMixtureNoise,
    x0: float,
    n: int,
    seed: int,
    horizon: int = 0,
    guard: float = ESCAPE_GUARD,
) -> TimeSeriesDataset:
    """Generate ``x_i = g(x_{i-1}) + z_i`` for i = 1..n (+ horizon).

    Deterministic for a fixed seed; the first n points are identical for
    any ``horizon`` because the noise stream is consumed stepwise.  The
    extra ``horizon`` points are stored as ``future_truth``.

    Raises
    ------
    OrbitEscapeError
        If some |x_i| exceeds ``guard``; the message names the index.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    total = n + horizon
    xs = np.empty(total)
    x = float(x0)
    for i in range(total):
        x = pmap(x) + noise.sample(rng)
        if abs(x) > guard:
            raise OrbitEscapeError(i + 1, x, guard)
        xs[i] = x
    return TimeSeriesDataset(
        observations=xs[:n],
        x0_true=float(x0),
        map_true=pmap,
        noise_true=noise,
        seed=int(seed),
        future_truth=xs[n:] if horizon > 0 else None,
    )


def deterministic_orbit(
    pmap: PolynomialMap, x0: float, n: int, guard: float = ESCAPE_GUARD
) -> np.ndarray:
    """Noise-free orbit ``[x0, g(x0), ..., g^(n)(x0)]`` of length n+1."""
    xs = np.empty(n + 1)
    xs[0] = x = float(x0)
    for i in range(1, n + 1):
        x = pmap(x)
        if abs(x) > guard:
            raise OrbitEscapeError(i, x, guard)
        xs[i] = x
    return xs


def liapunov_exponent(pmap: PolynomialMap, x0: float, n: int, burn: int = 0) -> float:
    """Average of log|g'(x_i)| along the orbit, after ``burn`` iterates.

    Iterates where g' vanishes exactly are skipped; a RuntimeWarning
    reports how many were dropped.
    """
    if not 0 <= burn < n:
        raise ValueError("need 0 <= burn < n")
    orbit = deterministic_orbit(pmap, x0, n - 1)  # states x_0 .. x_{n-1}
    deriv = np.abs(pmap.derivative_at(orbit[burn:]))
    zero = deriv == 0.0
    skipped = int(zero.sum())
    if skipped:
        warnings.warn(
            f"skipped {skipped} iterate(s) with zero derivative", RuntimeWarning
        )
        deriv = deriv[~zero]
    if deriv.size == 0:
        raise ValueError("no usable iterates (derivative zero everywhere)")
    return float(np.mean(np.log(deriv)))


# ---------------------------------------------------------------------------
# Invariant set of the doubly composed map
# ---------------------------------------------------------------------------


def _compose_with_self(coeffs: tuple[float, ...]) -> np.ndarray:
    """Coefficients of g(g(x)) via Horner over polynomial arithmetic."""
    from numpy.polynomial import polynomial as P

    inner = np.asarray(coeffs, dtype=float)
    comp = np.array([coeffs[-1]])
    for k in range(len(coeffs) - 2, -1, -1):
        comp = P.polyadd(P.polymul(comp, inner), [coeffs[k]])
    return comp


def invariant_interval(pmap: PolynomialMap, tol: float = 1e-9) -> tuple[float, float]:
    """Extreme real solutions of ``g(g(x)) = x``.

    The closed interval between them is invariant under g for maps of the
    kind studied here; orbits started outside leave towards infinity.

    Raises
    ------
    NoInvariantIntervalError
        If ``g(g(x)) - x`` is degenerate or has fewer than two real roots.
    """
    comp = _compose_with_self(pmap.coefficients)
    comp = comp.copy()
    comp[1] -= 1.0
    try:
        roots = real_roots(comp, tol=tol)
    except DegeneratePolynomialError as exc:
        raise NoInvariantIntervalError(
            "no invariant interval: g(g(x)) - x is degenerate"
        ) from exc
    if roots.size < 2:
        raise NoInvariantIntervalError(
            f"no invariant interval: found {roots.size} real fixed point(s) of g(g(x))"
        )
    return float(roots[0]), float(roots[-1])


@dataclass(frozen=True)
class FactCheck:
    fact: int
    description: str
    passed: bool
    worst_violation: float


@dataclass(frozen=True)
class InvarianceReport:
    interval: tuple[float, float]
    facts: tuple[FactCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(f.passed for f in self.facts)


def verify_invariance_facts(
    pmap: PolynomialMap,
    grid_step: float = 1e-3,
    margin: float = 2.0,
    tol: float = 1e-6,
) -> InvarianceReport:
    """Grid check of the five geometric facts behind the invariant interval.

    1. g swaps the endpoints.
    2. The interval is closed under g.
    3. g(x) > x and g(g(x)) < x on the left exterior.
    4. g(x) < x and g(g(x)) > x on the right exterior.
    5. g is decreasing and g(g(.)) increasing on each exterior piece.

    Each fact reports its worst violation on a grid extending ``margin``
    beyond the interval; a fact passes when the violation is below ``tol``.
    """
    x_lo, x_hi = invariant_interval(pmap)

    def g(x):
        return pmap(x)

    def g2(x):
        return pmap(pmap(x))

    facts = []

    v1 = max(abs(g(x_lo) - x_hi), abs(g(x_hi) - x_lo))
    facts.append(FactCheck(1, "endpoints swap under g", v1 <= tol, float(v1)))

    inside = np.arange(x_lo, x_hi + grid_step / 2, grid_step)
    gi = g(inside)
    v2 = max(float(np.max(x_lo - gi, initial=0.0)), float(np.max(gi - x_hi, initial=0.0)))
    facts.append(FactCheck(2, "interval closed under g", v2 <= tol, v2))

    left = np.arange(x_lo - margin, x_lo - grid_step / 2, grid_step)
    right = np.arange(x_hi + grid_step, x_hi + margin + grid_step / 2, grid_step)

    v3 = max(
        float(np.max(left - g(left), initial=0.0)),
        float(np.max(g2(left) - left, initial=0.0)),
    )
    facts.append(FactCheck(3, "g above / g∘g below identity on left exterior", v3 <= tol, v3))

    v4 = max(
        float(np.max(g(right) - right, initial=0.0)),
        float(np.max(right - g2(right), initial=0.0)),
    )
    facts.append(FactCheck(4, "g below / g∘g above identity on right exterior", v4 <= tol, v4))

    v5 = 0.0
    for ext in (left, right):
        if ext.size >= 2:
            v5 = max(v5, float(np.max(np.diff(g(ext)), initial=0.0)))
            v5 = max(v5, float(np.max(-np.diff(g2(ext)), initial=0.0)))
    facts.append(
        FactCheck(5, "g decreasing and g∘g increasing on the exterior", v5 <= tol, v5)
    )

    return InvarianceReport(interval=(x_lo, x_hi), facts=tuple(facts))


# ---------------------------------------------------------------------------
# Quasi-invariant measure estimation
# ---------------------------------------------------------------------------


def quasi_invariant_samples(
    pmap: PolynomialMap,
    noise: GaussianMixtureNoise,
    x0: float,
    n_long: int,
    burn: int = 1000,
    keep_range: tuple[float, float] | None = None,
    seed: int = 0,
    guard: float = ESCAPE_GUARD,
) -> np.ndarray:
    """Long noisy orbit conditioned on non-escape, as raw samples.

    Escape to infinity is detected with the guard; the divergent tail of
    the segment (the trailing run outside ``keep_range``) is discarded
    and the orbit restarts from ``x0`` with a fresh stretch of the noise
    stream, re-running the burn-in.  This restart scheme is a surrogate
    for conditioning on the trapping time.

    Raises
    ------
    NoiseTooStrongError
        If more than half of the simulated steps are wasted on escaping
        segments and repeated burn-ins.
    """
    if n_long <= burn:
        raise ValueError("n_long must exceed burn")
    if keep_range is None:
        lo, hi = invariant_interval(pmap)
        pad = 0.05 * (hi - lo)
        keep_range = (lo - pad, hi + pad)

    rng = np.random.default_rng(seed)
    samples = np.empty(n_long)
    kept = 0
    seg_start = 0  # first buffer index of the current segment
    steps = 0
    budget = 2 * (n_long + burn)
    chunk = 8192

    x = float(x0)
    warmed = 0
    noise_buf = noise.sample_many(rng, chunk)
    buf_pos = 0
    while kept < n_long:
        if steps >= budget:
            raise NoiseTooStrongError(
                "noise too strong for quasi-invariant estimate "
                f"(>50% of {steps} steps discarded)"
            )
        if buf_pos == chunk:
            noise_buf = noise.sample_many(rng, chunk)
            buf_pos = 0
        x = pmap(x) + noise_buf[buf_pos]
        buf_pos += 1
        steps += 1
        if abs(x) > guard:
            # drop the divergent tail of this segment, then restart
            j = kept
            while j > seg_start and not (keep_range[0] <= samples[j - 1] <= keep_range[1]):
                j -= 1
            kept = j
            seg_start = kept
            x = float(x0)
            warmed = 0
            continue
        if warmed < burn:
            warmed += 1
            continue
        samples[kept] = x
        kept += 1
    return samples


def quasi_invariant_density(
    pmap: PolynomialMap,
    noise: GaussianMixtureNoise,
    x0: float,
    n_long: int,
    burn: int = 1000,
    bins: int = 300,
    hist_range: tuple[float, float] | None = None,
    seed: int = 0,
    guard: float = ESCAPE_GUARD,
) -> EmpiricalDensity:
    """Histogram of a long noisy orbit conditioned on non-escape.

    See quasi_invariant_samples for the escape/restart semantics.
    """
    if hist_range is None:
        lo, hi = invariant_interval(pmap)
        pad = 0.05 * (hi - lo)
        hist_range = (lo - pad, hi + pad)
    samples = quasi_invariant_samples(
        pmap, noise, x0, n_long, burn=burn, keep_range=hist_range, seed=seed, guard=guard
    )
    counts, edges = np.histogram(samples, bins=bins, range=hist_range)
    width = float(edges[1] - edges[0])
    total = counts.sum()
    if total == 0:
        raise NoiseTooStrongError("no samples landed in the histogram range")
    mass = counts / (total * width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return EmpiricalDensity(grid=centers, mass=mass, bin_width=width)


# ---------------------------------------------------------------------------
# The maps and noise processes used throughout the experiments
# ---------------------------------------------------------------------------


def cubic_map(vartheta: float = 2.55) -> PolynomialMap:
    """Cubic drift 0.05 + vartheta*x - 0.99*x^3 (globally chaotic at 2.55)."""
    return PolynomialMap((0.05, vartheta, 0.0, -0.99))


def logistic_map(vartheta: float = 1.71) -> PolynomialMap:
    """Logistic-form drift 1 - vartheta*x^2."""
    return PolynomialMap((1.0, 0.0, -vartheta))


def noise_f1(sigma: float = 1e-2) -> GaussianMixtureNoise:
    """Equally weighted 4-mixture with variances (5r+1)*sigma^2, r=0..3."""
    return GaussianMixtureNoise(
        tuple((0.25, (5 * r + 1) * sigma**2) for r in range(4))
    )


def noise_f2(level: int, sigma: float = 1e-3) -> GaussianMixtureNoise:
    """Two-component mixture with tails growing heavier in ``level`` (1..4).

    Mixes N(0, sigma^2) with weight (5+level)/10 and N(0, (200*sigma)^2)
    with weight (5-level)/10.
    """
    if level not in (1, 2, 3, 4):
        raise ValueError("level must be in 1..4")
    w = (5 + level) / 10.0
    return GaussianMixtureNoise(((w, sigma**2), (1.0 - w, (200.0 * sigma) ** 2)))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_dataset(ds: TimeSeriesDataset, csv_path, meta_path=None) -> None:
    """Write observations as ``index,x`` CSV plus a JSON metadata sidecar."""
    csv_path = Path(csv_path)
    lines = ["index,x"]
    lines += [f"{i + 1},{float(x)!r}" for i, x in enumerate(ds.observations)]
    csv_path.write_text("\n".join(lines) + "\n")

    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".meta.json")
    meta = {
        "n": ds.n,
        "x0_true": ds.x0_true,
        "seed": ds.seed,
        "map_coefficients": list(ds.map_true.coefficients) if ds.map_true else None,
        "noise_components": [list(c) for c in ds.noise_true.components]
        if ds.noise_true
        else None,
        "future_truth": ds.future_truth.tolist() if ds.future_truth is not None else None,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")


def load_dataset(csv_path, meta_path=None) -> TimeSeriesDataset:
    """Inverse of save_dataset; tolerates a missing metadata sidecar."""
    csv_path = Path(csv_path)
    rows = csv_path.read_text().strip().splitlines()
    if not rows or rows[0].strip() != "index,x":
        raise ValueError(f"{csv_path}: expected header 'index,x'")
    obs = np.array([float(r.split(",")[1]) for r in rows[1:]])

    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".meta.json")
    kwargs = {}
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        if meta.get("map_coefficients"):
            kwargs["map_true"] = PolynomialMap(tuple(meta["map_coefficients"]))
        if meta.get("noise_components"):
            kwargs["noise_true"] = GaussianMixtureNoise(
                tuple(tuple(c) for c in meta["noise_components"])
            )
        if meta.get("future_truth") is not None:
            kwargs["future_truth"] = np.array(meta["future_truth"])
        kwargs["x0_true"] = meta.get("x0_true")
        kwargs["seed"] = meta.get("seed")
    return TimeSeriesDataset(observations=obs, **kwargs)


def save_density(density: EmpiricalDensity, path) -> None:
    """Write a density as ``grid,mass`` CSV."""
    lines = ["grid,mass"]
    lines += [f"{float(g)!r},{float(m)!r}" for g, m in zip(density.grid, density.mass)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_density(path) -> EmpiricalDensity:
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "grid,mass":
        raise ValueError(f"{path}: expected header 'grid,mass'")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    width = float(data[1, 0] - data[0, 0]) if data.shape[0] > 1 else 1.0
    return EmpiricalDensity(grid=data[:, 0], mass=data[:, 1], bin_width=width)
