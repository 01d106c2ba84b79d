"""Correlation sums and generalized-dimension estimates of order k.

Both estimators plug the empirical measure of the sample into the two
integrals whose common log-log slope is (k-1) * D_k:

* the centered sum  mean_i (mu_M(B(x_i, r)))^(k-1), and
* the k-tuple sum   mu_M^k{ (y_1..y_k) : all pairwise d <= r },

where mu_M is the empirical measure (atoms 1/M at each sample point).
Because they are integrals of one probability measure, the sandwich

    centered(r/2) <= ktuple(r) <= centered(r)

holds deterministically for every finite sample, exactly as it does for
the underlying invariant measure.  (The diagonal terms this convention
keeps are O(1/M) and vanish in the slope; ``distinct=True`` switches the
k-tuple sum to distinct-index tuples for cross-checks, at the price of
the deterministic sandwich.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    Beta,
    Gauss,
    MapSpec,
    MTimesMod1,
    PiecewiseDoubling,
    SkewProduct,
    TorusExpanding,
    map_dim,
)
from .distance import MetricSpec, _as_points, pairwise_distance
from .errors import NoUsableRadii, TooFewPoints

# Exact k-tuple enumeration bounds; beyond them tuples are subsampled.
_EXACT_MAX_POINTS = 200
_EXACT_MAX_ORDER = 3

# Radii whose unordered pair count falls below this are regression noise.
_MIN_PAIR_HITS = 25

# Elements per distance block when scanning all pairs.
_PAIR_BLOCK = 4_000_000


@dataclass(frozen=True)
class RadiiLadder:
    """Geometric radii r_j = r0 * ratio^j, j = 0..count-1."""

    r0: float
    count: int
    ratio: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.r0 < 1.0:
            raise ValueError("r0 must lie in (0, 1)")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie in (0, 1) so radii decrease")
        if self.count < 4:
            raise ValueError("need at least 4 radii")

    @property
    def radii(self) -> np.ndarray:
        return self.r0 * self.ratio ** np.arange(self.count)


@dataclass
class DimensionEstimate:
    """Regression summary for one dimension estimate."""

    dimension: float
    order: int
    slope: float
    intercept: float
    residual: float
    estimator: str
    radii: np.ndarray  # radii that entered the regression
    correlations: np.ndarray  # their correlation values
    all_radii: np.ndarray = field(repr=False, default=None)
    all_correlations: np.ndarray = field(repr=False, default=None)
    pair_hits: np.ndarray = field(repr=False, default=None)


def _check_sample(points, k: int, metric: MetricSpec) -> np.ndarray:
    if k < 2 or int(k) != k:
        raise ValueError(f"order k must be an integer >= 2, got {k!r}")
    pts = _as_points(points, metric.dim)
    if pts.shape[0] < k:
        raise TooFewPoints(f"need at least k={k} points, got {pts.shape[0]}")
    return pts


def neighbor_counts(points: np.ndarray, radii, metric: MetricSpec) -> np.ndarray:
    """Per-point counts of sample points within each radius (self included)."""
    pts = _as_points(points, metric.dim)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    m = pts.shape[0]
    counts = np.empty((m, radii.size), dtype=np.int64)
    chunk = max(1, _PAIR_BLOCK // max(1, m))
    for lo in range(0, m, chunk):
        d = pairwise_distance(metric, pts[lo : lo + chunk, None, :], pts[None, :, :])
        for j, r in enumerate(radii):
            counts[lo : lo + chunk, j] = (d <= r).sum(axis=1)
    return counts


def _centered_values(counts: np.ndarray, m: int, k: int) -> np.ndarray:
    """mean_i (c_i / m)^(k-1) per radius column, as exact ratios when safe.

    Integer numerators over the common denominator m^k keep the sandwich
    comparisons against the k-tuple sum free of rounding artifacts.
    """
    if k * math.log2(m) <= 62:
        numerators = (counts ** (k - 1)).sum(axis=0)
        return np.array([float(int(num)) / m**k for num in numerators])
    return ((counts / m) ** (k - 1)).mean(axis=0)


def centered_correlation_sum(points, r: float, k: int, metric: MetricSpec) -> float:
    """Empirical-measure value of  int mu(B(x, r))^(k-1) dmu(x)."""
    pts = _check_sample(points, k, metric)
    counts = neighbor_counts(pts, [r], metric)
    m = pts.shape[0]
    return float(_centered_values(counts, m, k)[0])


def _pair_mask(pts: np.ndarray, r: float, metric: MetricSpec, distinct: bool) -> np.ndarray:
    d = pairwise_distance(metric, pts[:, None, :], pts[None, :, :])
    mask = (d <= r).astype(float)
    if distinct:
        np.fill_diagonal(mask, 0.0)
    return mask


def ktuple_correlation_sum(
    points,
    r: float,
    k: int,
    metric: MetricSpec,
    *,
    distinct: bool = False,
    rng: np.random.Generator | None = None,
    tuples: int = 1_000_000,
) -> float:
    """Fraction of ordered k-tuples of sample points that are pairwise within r.

    Exact enumeration for k = 2 (any M) and for k = 3 with M <= 200;
    larger problems draw ``tuples`` uniform index tuples with the given
    generator.  ``distinct=True`` restricts to tuples of pairwise
    distinct indices.
    """
    pts = _check_sample(points, k, metric)
    m = pts.shape[0]
    if k == 2:
        counts = neighbor_counts(pts, [r], metric)[:, 0]
        hits = int(counts.sum())
        if distinct:
            return float((hits - m) / (m * (m - 1)))
        return float(hits / (m * m))
    if k <= _EXACT_MAX_ORDER and m <= _EXACT_MAX_POINTS:
        mask = _pair_mask(pts, r, metric, distinct)
        total = int(round(float(np.einsum("ij,il,jl->", mask, mask, mask))))
        denom = m * (m - 1) * (m - 2) if distinct else m**3
        return float(total) / denom
    if rng is None:
        raise TooFewPoints(
            f"k-tuple sum with M={m}, k={k} needs subsampling; pass a generator"
        )
    npairs = k * (k - 1) // 2
    got = 0
    close = 0
    while got < tuples:
        batch = min(tuples - got, max(1024, 200_000 // npairs))
        idx = rng.integers(0, m, size=(batch, k))
        if distinct:
            keep = np.ones(batch, dtype=bool)
            for a in range(k):
                for b in range(a + 1, k):
                    keep &= idx[:, a] != idx[:, b]
            idx = idx[keep]
        ok = np.ones(idx.shape[0], dtype=bool)
        for a in range(k):
            for b in range(a + 1, k):
                d = pairwise_distance(metric, pts[idx[:, a]], pts[idx[:, b]])
                ok &= d <= r
        close += int(ok.sum())
        got += idx.shape[0] if distinct else batch
        if distinct and idx.shape[0] == 0:
            raise TooFewPoints("could not draw distinct-index tuples")
    return close / got


def estimate_Dk(
    points,
    ladder: RadiiLadder,
    k: int,
    metric: MetricSpec,
    *,
    estimator: str = "centered",
    rng: np.random.Generator | None = None,
) -> DimensionEstimate:
    """Least-squares dimension estimate from the correlation decay.

    Fits log(correlation) against log(r) over the usable radii (at least
    25 pair hits, correlation strictly between 0 and 1) and divides the
    slope by k-1.  Raises :class:`NoUsableRadii` when fewer than three
    radii survive or the correlation does not vary.
    """
    pts = _check_sample(points, k, metric)
    m = pts.shape[0]
    radii = ladder.radii
    counts = neighbor_counts(pts, radii, metric)
    pair_hits = (counts.sum(axis=0) - m) // 2
    if estimator == "centered":
        values = _centered_values(counts, m, k)
    elif estimator == "ktuple":
        values = np.array(
            [ktuple_correlation_sum(pts, r, k, metric, rng=rng) for r in radii]
        )
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    usable = (pair_hits >= _MIN_PAIR_HITS) & (values > 0.0) & (values < 1.0)
    if usable.sum() < 3:
        raise NoUsableRadii(
            f"only {int(usable.sum())} usable radii (saturated or below noise floor)"
        )
    x = np.log(radii[usable])
    y = np.log(values[usable])
    if np.ptp(y) == 0.0:
        raise NoUsableRadii("correlation sum does not vary across usable radii")
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return DimensionEstimate(
        dimension=float(slope) / (k - 1),
        order=int(k),
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
        estimator=estimator,
        radii=radii[usable],
        correlations=values[usable],
        all_radii=radii,
        all_correlations=values,
        pair_hits=pair_hits,
    )


def theoretical_Dk(spec: MapSpec, k: int = 2):
    """Known generalized dimension of the map's invariant measure, or None.

    The interval systems carry absolutely continuous invariant measures
    with bounded densities, so every order has dimension 1; the expanding
    N-torus maps have Lebesgue, dimension N.  For skew products whose
    fibers all preserve Lebesgue the fiber marginal is Lebesgue as well.
    """
    if isinstance(spec, (MTimesMod1, Beta, Gauss, PiecewiseDoubling)):
        return 1.0
    if isinstance(spec, TorusExpanding):
        return float(spec.dim)
    if isinstance(spec, SkewProduct):
        if all(isinstance(f, (MTimesMod1, TorusExpanding, PiecewiseDoubling)) for f in spec.fibers):
            return float(map_dim(spec))
        return None
    return None
