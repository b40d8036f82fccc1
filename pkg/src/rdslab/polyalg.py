"""Real roots of polynomials and the interval-union sets used by the samplers.

The embedded Gibbs updates for the initial condition and the future states
repeatedly need the open set ``{x : lower < g(x) < upper}`` for a polynomial
``g``.  That set is a finite union of open intervals whose boundaries are
real roots of ``g(x) - lower`` and ``g(x) - upper``; this module extracts
those roots (companion-matrix eigenvalues plus a Newton polish), assembles
the interval union, and samples uniformly from it.

Root extraction is vectorised over batches of polynomials because the
samplers solve ~2T of them per Gibbs iteration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

# Sentinel magnitude for unbounded interval ends.  Unions containing a
# sentinel endpoint must be clipped with intersect_box before sampling.
UNBOUNDED = 1.0e12

# Intervals shorter than this are collapsed tangencies and carry no mass.
_COLLAPSE_LEN = 1.0e-12


class DegeneratePolynomialError(ValueError):
    """Raised when asked for roots of the zero polynomial."""


class EmptySupportError(ValueError):
    """Raised when sampling from an interval union with zero total length."""


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted union of pairwise-disjoint open intervals."""

    intervals: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        prev_hi = -np.inf
        for lo, hi in self.intervals:
            if not lo < hi:
                raise ValueError(f"empty interval ({lo}, {hi})")
            if lo < prev_hi:
                raise ValueError("intervals must be sorted and disjoint")
            prev_hi = hi

    @property
    def total_length(self) -> float:
        return float(sum(hi - lo for lo, hi in self.intervals))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, x: float) -> bool:
        """Membership in the open union (boundary points excluded)."""
        return any(lo < x < hi for lo, hi in self.intervals)

    def has_unbounded_end(self) -> bool:
        return any(
            abs(lo) >= UNBOUNDED or abs(hi) >= UNBOUNDED
            for lo, hi in self.intervals
        )


def _trim(coefficients) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coefficients, dtype=float))
    nz = np.flatnonzero(c != 0.0)
    if nz.size == 0:
        raise DegeneratePolynomialError("degenerate polynomial (all coefficients zero)")
    return c[: nz[-1] + 1]


def roots_batch(coeffs: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Real roots of a batch of same-degree polynomials.

    Parameters
    ----------
    coeffs
        Array of shape ``(B, m+1)``, ascending coefficients, nonzero
        leading column.
    tol
        Duplicate-merge tolerance; residuals are polished below
        ``tol * (1 + max|coeff|)`` per polynomial.

    Returns
    -------
    roots
        ``(B, m)`` array, each row the sorted real roots padded with
        ``np.inf`` on the right.
    counts
        ``(B,)`` number of real roots per polynomial.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    B, mp1 = coeffs.shape
    m = mp1 - 1
    if m < 1:
        return np.full((B, 0), np.inf), np.zeros(B, dtype=int)
    if np.any(coeffs[:, -1] == 0.0):
        raise ValueError("leading coefficient must be nonzero in every row")

    if m == 1:
        roots = (-coeffs[:, :1] / coeffs[:, 1:2]).astype(complex)
    else:
        comp = np.zeros((B, m, m))
        idx = np.arange(m - 1)
        comp[:, idx + 1, idx] = 1.0
        comp[:, :, -1] = -coeffs[:, :-1] / coeffs[:, -1:]
        roots = np.linalg.eigvals(comp)

    # Newton polish on the full complex set; the eigenvalues are already
    # accurate, so a few fused value/derivative Horner steps suffice.
    for _ in range(3):
        p = np.empty_like(roots)
        p[:] = coeffs[:, -1:]
        dp = np.zeros_like(roots)
        for k in range(mp1 - 2, -1, -1):
            dp = dp * roots + p
            p = p * roots + coeffs[:, k : k + 1]
        step = np.where(np.abs(dp) > 1e-300, p / np.where(dp == 0, 1.0, dp), 0.0)
        # refuse wild steps near multiple roots
        step = np.where(np.abs(step) < 1.0, step, 0.0)
        roots = roots - step

    real_mask = np.abs(roots.imag) <= 1e-8 * (1.0 + np.abs(roots))
    vals = np.where(real_mask, roots.real, np.inf)
    vals = np.sort(vals, axis=1)
    counts = real_mask.sum(axis=1)

    # merge duplicates within tol (row-wise, vectorised)
    if m > 1:
        finite = np.isfinite(vals)
        dup = np.zeros_like(finite)
        with np.errstate(invalid="ignore"):
            dup[:, 1:] = finite[:, 1:] & (np.diff(vals, axis=1) <= tol)
        if dup.any():
            vals = np.where(dup, np.inf, vals)
            vals = np.sort(vals, axis=1)
            counts = counts - dup.sum(axis=1)
    return vals, counts


def real_roots(coefficients, tol: float = 1e-9) -> np.ndarray:
    """All real roots of a polynomial, sorted ascending.

    Coefficients are ascending (constant term first); trailing zeros are
    trimmed.  Complex conjugate pairs are excluded by an imaginary-part
    threshold of ``1e-8 * (1 + |root|)``; near-coincident roots are merged
    within ``tol``.

    Raises
    ------
    DegeneratePolynomialError
        If every coefficient is zero.
    """
    c = _trim(coefficients)
    if c.size == 1:
        return np.array([])  # nonzero constant: no roots
    vals, counts = roots_batch(c[None, :], tol=tol)
    return vals[0, : counts[0]].copy()


def _select_cells(
    boundaries, g_coeffs, lower: float, upper: float
) -> list[tuple[float, float]]:
    """Cells of ``{x : lower < g(x) < upper}`` as a plain sorted tuple list.

    The boundary points partition the line; each open cell is classified
    by evaluating g at its midpoint, which covers every parity and
    leading-sign case uniformly.  Unbounded end cells use ``UNBOUNDED``
    sentinels (they are excluded whenever g is nonconstant).  Hot-path
    variant: no dataclass construction, pure floats.
    """
    pts = [-UNBOUNDED, *map(float, boundaries), UNBOUNDED]
    coeffs = tuple(map(float, g_coeffs))
    cells: list[tuple[float, float]] = []
    for i in range(len(pts) - 1):
        lo, hi = pts[i], pts[i + 1]
        if hi - lo < _COLLAPSE_LEN:
            continue
        mid = 0.5 * (lo + hi)
        gm = 0.0
        for c in reversed(coeffs):
            gm = gm * mid + c
        if not lower < gm < upper:
            continue
        if cells and cells[-1][1] == lo:
            # tangency boundary with the region on both sides: merge
            cells[-1] = (cells[-1][0], hi)
        else:
            cells.append((lo, hi))
    return cells


def _clip_cells(
    cells: list[tuple[float, float]], lo: float, hi: float
) -> list[tuple[float, float]]:
    """Hot-path intersection with an open box."""
    out = []
    for a, b in cells:
        a2 = a if a > lo else lo
        b2 = b if b < hi else hi
        if b2 - a2 >= _COLLAPSE_LEN:
            out.append((a2, b2))
    return out


def _sample_cells(cells: list[tuple[float, float]], rng: np.random.Generator) -> float:
    """Hot-path length-weighted uniform draw; cells must be clipped/bounded."""
    total = 0.0
    for a, b in cells:
        total += b - a
    if total <= 0.0:
        raise EmptySupportError("empty support")
    pos = rng.random() * total
    for a, b in cells:
        width = b - a
        if pos <= width:
            x = a + pos
            return x if x < b else b
        pos -= width
    return cells[-1][1]


def region_Rg(pmap, lower: float, upper: float, tol: float = 1e-9) -> IntervalUnion:
    """Open set ``{x : lower < g(x) < upper}`` for a polynomial map g.

    Boundaries are the real roots of ``g(x) - lower`` and ``g(x) - upper``,
    extracted in a single batched solve.  The result may legitimately be
    empty (band entirely outside the range of g).
    """
    if not lower < upper:
        raise ValueError(f"band requires lower < upper, got ({lower}, {upper})")
    c = np.asarray(pmap.coefficients, dtype=float)
    pair = np.tile(c, (2, 1))
    pair[0, 0] -= lower
    pair[1, 0] -= upper
    vals, counts = roots_batch(pair, tol=tol)
    boundaries = np.sort(
        np.concatenate([vals[0, : counts[0]], vals[1, : counts[1]]])
    )
    cells = _select_cells(boundaries, c, lower, upper)
    if len(cells) > max(1, c.size - 1):
        warnings.warn(
            f"region has {len(cells)} components, exceeding the "
            f"degree bound {c.size - 1}",
            RuntimeWarning,
        )
    return IntervalUnion(tuple(cells))


def intersect_box(u: IntervalUnion, lo: float, hi: float) -> IntervalUnion:
    """Intersection of an interval union with the open box ``(lo, hi)``."""
    if not lo < hi:
        raise ValueError(f"box requires lo < hi, got ({lo}, {hi})")
    clipped = []
    for a, b in u.intervals:
        a2, b2 = max(a, lo), min(b, hi)
        if b2 - a2 >= _COLLAPSE_LEN:
            clipped.append((a2, b2))
    return IntervalUnion(tuple(clipped))


def sample_uniform(u: IntervalUnion, rng: np.random.Generator) -> float:
    """Uniform draw over the union, intervals weighted by length.

    Raises
    ------
    EmptySupportError
        If the union is empty or has zero total length.
    ValueError
        If the union still carries an unbounded sentinel endpoint
        (caller forgot to clip with intersect_box).
    """
    if u.is_empty:
        raise EmptySupportError("empty support")
    if u.has_unbounded_end():
        raise ValueError("cannot sample an unclipped (unbounded) interval union")
    lengths = np.array([hi - lo for lo, hi in u.intervals])
    total = lengths.sum()
    if total <= 0.0:
        raise EmptySupportError("empty support")
    pos = rng.random() * total
    cum = np.cumsum(lengths)
    k = int(np.searchsorted(cum, pos, side="right"))
    k = min(k, len(lengths) - 1)
    lo, hi = u.intervals[k]
    offset = pos - (cum[k] - lengths[k])
    x = lo + offset
    x = min(max(x, lo), hi)
    assert lo <= x <= hi
    return float(x)
