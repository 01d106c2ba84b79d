"""Shortest distance between k orbits and the close-tuple counting statistic.

The k-point distance of a tuple is the maximum over its pairwise
distances, so the shortest distance between k orbits up to time n is

    m_n = min over (i_1, ..., i_k) in {0..n-1}^k of
          max_{j != l} d(x_j[i_j], x_l[i_l]).

:func:`shortest_distance_bruteforce` enumerates every tuple and is the
oracle; :func:`shortest_distance_fast` returns the identical value via a
shrinking-radius grid search: bucket all points into cells of side >= r,
a tuple of diameter <= r must lie inside one 3^N-cell neighbourhood,
scan the neighbourhoods populated by every orbit, enumerate them
exactly, and halve r until a complete scan pins the minimum down.  Both
paths share one distance kernel, so agreement is bitwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .dynamics import (
    AffineObservation,
    CoordinateProjection,
    Identity,
    ObservationSpec,
    observe_orbit,
)
from .errors import DimensionMismatch, KTooSmall, NTooLarge

# Caps on materialised tuple arrays: brute force raises beyond the first,
# the exact block/brute kernel splits its work beyond the second.
_BRUTE_MAX_ELEMENTS = 64_000_000
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class TorusWrap:
    """Flat-torus metric: per-coordinate distance min(|a-b|, 1-|a-b|)."""

    dim: int


@dataclass(frozen=True)
class EuclideanBox:
    """Plain Euclidean metric on [0, 1)^N."""

    dim: int


MetricSpec = Union[TorusWrap, EuclideanBox]


def pairwise_distance(metric: MetricSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance between broadcastable stacks of points with trailing dim axis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = np.abs(a - b)
    if isinstance(metric, TorusWrap):
        diff = np.minimum(diff, 1.0 - diff)
    if metric.dim == 1:
        return diff[..., 0]
    return np.sqrt(np.einsum("...i,...i->...", diff, diff))


def _as_points(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise DimensionMismatch(f"expected points of dimension {dim}, got shape {pts.shape}")
    return pts


def kdiameter(points, metric: MetricSpec) -> float:
    """Max over pairwise distances of k >= 2 points (0 iff all coincide)."""
    pts = _as_points(points, metric.dim)
    k = pts.shape[0]
    if k < 2:
        raise KTooSmall(f"k-point diameter needs k >= 2 points, got {k}")
    d = pairwise_distance(metric, pts[:, None, :], pts[None, :, :])
    return float(d.max())


@dataclass(frozen=True)
class OrbitSet:
    """k orbits of equal length with a shared metric; array shape (k, n, dim)."""

    orbits: np.ndarray
    metric: MetricSpec

    def __post_init__(self):
        arr = np.asarray(self.orbits, dtype=float)
        if arr.ndim != 3:
            raise DimensionMismatch("orbits array must have shape (k, n, dim)")
        if arr.shape[0] < 2:
            raise KTooSmall(f"need k >= 2 orbits, got {arr.shape[0]}")
        if arr.shape[1] < 1:
            raise ValueError("orbits must contain at least one point")
        if arr.shape[2] != self.metric.dim:
            raise DimensionMismatch(
                f"orbit dimension {arr.shape[2]} != metric dimension {self.metric.dim}"
            )
        object.__setattr__(self, "orbits", arr)

    @classmethod
    def from_arrays(cls, orbits: Sequence[np.ndarray], metric: MetricSpec) -> "OrbitSet":
        """Stack per-orbit arrays of shape (n,) or (n, dim)."""
        norm = []
        for o in orbits:
            arr = np.asarray(o, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            norm.append(arr)
        lengths = {a.shape[0] for a in norm}
        if len(lengths) != 1:
            raise DimensionMismatch(f"orbits have unequal lengths {sorted(lengths)}")
        return cls(np.stack(norm), metric)

    @property
    def k(self) -> int:
        return self.orbits.shape[0]

    @property
    def length(self) -> int:
        return self.orbits.shape[1]

    def _window(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError("window must be >= 1")
        if n > self.length:
            raise NTooLarge(f"window {n} exceeds orbit length {self.length}")
        return self.orbits[:, :n, :]


def _tuple_min_diameter(pts: Sequence[np.ndarray], metric: MetricSpec) -> float:
    """Exact min over all index tuples of the max pairwise distance.

    Splits the largest axis recursively once the broadcast array would
    exceed the chunk cap, so memory stays bounded for any input.
    """
    sizes = [p.shape[0] for p in pts]
    if any(s == 0 for s in sizes):
        return math.inf
    total = math.prod(sizes)
    if total > _CHUNK_ELEMENTS:
        j = max(range(len(sizes)), key=lambda i: sizes[i])
        half = sizes[j] // 2
        left = list(pts)
        right = list(pts)
        left[j] = pts[j][:half]
        right[j] = pts[j][half:]
        return min(
            _tuple_min_diameter(left, metric), _tuple_min_diameter(right, metric)
        )
    k = len(pts)
    running = np.zeros(sizes[0], dtype=float)
    for j in range(1, k):
        running = np.broadcast_to(running[..., None], running.shape + (sizes[j],)).copy()
        for l in range(j):
            d = pairwise_distance(metric, pts[l][:, None, :], pts[j][None, :, :])
            view = (1,) * l + (sizes[l],) + (1,) * (j - l - 1) + (sizes[j],)
            np.maximum(running, d.reshape(view), out=running)
    return float(running.min())


def shortest_distance_bruteforce(orbits: OrbitSet, n: int) -> float:
    """Oracle: minimum k-point diameter over all n^k index tuples."""
    window = orbits._window(n)
    if n**orbits.k > _BRUTE_MAX_ELEMENTS:
        raise NTooLarge(f"brute force over {n}^{orbits.k} tuples exceeds the size guard")
    return _tuple_min_diameter(list(window), orbits.metric)


# ---------------------------------------------------------------------------
# grid-accelerated exact search


def _rows_as_void(pts: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(pts)
    return arr.view(np.dtype((np.void, arr.dtype.itemsize * arr.shape[1]))).ravel()


def _have_common_point(points: Sequence[np.ndarray]) -> bool:
    """True iff some coordinate vector occurs in every orbit (m_n = 0)."""
    common = _rows_as_void(points[0])
    for pts in points[1:]:
        common = np.intersect1d(common, _rows_as_void(pts), assume_unique=False)
        if common.size == 0:
            return False
    return True


def _grid_geometry(metric: MetricSpec, r: float):
    """Cell side for scale r, honouring int64 key-space limits.

    Returns (side, modulus, floored): ``side >= r`` always, so the
    3^N-neighbourhood covering argument is valid at every scale;
    ``floored`` reports that finer grids are not representable.
    """
    dim = metric.dim
    cap = 1 << max(1, 62 // dim)
    if isinstance(metric, TorusWrap):
        natural = max(1, int(1.0 / r)) if r < 1.0 else 1
        m = min(natural, cap)
        return 1.0 / m, m, m < natural
    if r >= 1.0 / cap:
        return r, None, False
    return 1.0 / cap, None, True


class _GridIndex:
    """Points of one orbit bucketed by flattened cell key."""

    def __init__(self, pts: np.ndarray, keys: np.ndarray):
        order = np.argsort(keys, kind="stable")
        self.sorted_keys = keys[order]
        self.sorted_pts = pts[order]
        self.unique_keys, self.unique_counts = np.unique(keys, return_counts=True)

    def counts_for(self, keys: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.unique_keys, keys)
        idx = np.minimum(idx, self.unique_keys.size - 1)
        found = self.unique_keys[idx] == keys
        return np.where(found, self.unique_counts[idx], 0)

    def points_in_cell(self, key: int) -> np.ndarray:
        lo = np.searchsorted(self.sorted_keys, key, side="left")
        hi = np.searchsorted(self.sorted_keys, key, side="right")
        return self.sorted_pts[lo:hi]


def _flatten_cells(coords: np.ndarray, stride: int) -> np.ndarray:
    keys = np.zeros(coords.shape[0], dtype=np.int64)
    for d in range(coords.shape[1]):
        keys = keys * stride + (coords[:, d] + 1)
    return keys


def _enumerate_blocks(indexes, anchor_keys, neighbor_keys, sel, metric, best):
    """Vectorised exact scan of the selected candidate neighbourhoods.

    Expands every index tuple of every block via ragged mixed-radix
    decoding, one batch per combination of neighbour offsets, so the
    Python overhead is independent of the anchor count.  Only used on
    budgeted scans, where the total tuple count is bounded.
    """
    k = len(indexes)
    lo0 = indexes[0].sorted_keys.searchsorted(anchor_keys[sel], side="left")
    hi0 = indexes[0].sorted_keys.searchsorted(anchor_keys[sel], side="right")
    ranges = []
    for idx in indexes[1:]:
        per_off = []
        for nk in neighbor_keys:
            lo = idx.sorted_keys.searchsorted(nk[sel], side="left")
            hi = idx.sorted_keys.searchsorted(nk[sel], side="right")
            per_off.append((lo, hi))
        ranges.append(per_off)

    for combo in itertools.product(range(len(neighbor_keys)), repeat=k - 1):
        los = [lo0] + [ranges[l][combo[l]][0] for l in range(k - 1)]
        sizes = [hi0 - lo0] + [
            ranges[l][combo[l]][1] - ranges[l][combo[l]][0] for l in range(k - 1)
        ]
        totals = sizes[0].copy()
        for s in sizes[1:]:
            totals *= s
        grand = int(totals.sum())
        if grand == 0:
            continue
        starts = np.concatenate([[0], np.cumsum(totals)[:-1]])
        anchor_of = np.repeat(np.arange(sel.size), totals)
        within = np.arange(grand, dtype=np.int64) - np.repeat(starts, totals)
        suffix = np.ones((k, sel.size), dtype=np.int64)
        for j in range(k - 2, -1, -1):
            suffix[j] = suffix[j + 1] * sizes[j + 1]
        gathered = []
        for j in range(k):
            digit = (within // suffix[j][anchor_of]) % np.maximum(sizes[j][anchor_of], 1)
            rows = los[j][anchor_of] + digit
            gathered.append(indexes[j].sorted_pts[rows])
        diam = np.zeros(grand, dtype=float)
        for a in range(k):
            for b in range(a + 1, k):
                np.maximum(diam, pairwise_distance(metric, gathered[a], gathered[b]), out=diam)
        val = float(diam.min())
        if val < best:
            best = val
    return best


def _grid_pass(points, metric: MetricSpec, r: float, best: float, budget):
    """One scan at cell side >= r.

    Returns (complete, best, side, floored).  ``complete`` means every
    candidate neighbourhood was enumerated exactly, so every tuple of
    diameter <= side was examined and ``best`` is exact below ``side``.
    """
    side, modulus, floored = _grid_geometry(metric, r)
    dim = metric.dim
    coords = []
    for pts in points:
        if modulus is not None:
            c = np.minimum((pts * modulus).astype(np.int64), modulus - 1)
        else:
            c = (pts / side).astype(np.int64)
        coords.append(c)
    stride = max(int(c.max(initial=0)) for c in coords) + 3
    indexes = [_GridIndex(p, _flatten_cells(c, stride)) for p, c in zip(points, coords)]

    anchor_keys, anchor_first = np.unique(_flatten_cells(coords[0], stride), return_index=True)
    anchor_coords = coords[0][anchor_first]
    offsets = list(itertools.product((-1, 0, 1), repeat=dim))
    neighbor_keys = []
    for off in offsets:
        shifted = anchor_coords + np.asarray(off, dtype=np.int64)
        if modulus is not None:
            shifted %= modulus
        neighbor_keys.append(_flatten_cells(shifted, stride))

    ok = np.ones(anchor_keys.size, dtype=bool)
    cost = indexes[0].counts_for(anchor_keys).astype(float)
    for idx in indexes[1:]:
        cnt = np.zeros(anchor_keys.size, dtype=np.int64)
        for nk in neighbor_keys:
            cnt += idx.counts_for(nk)
        ok &= cnt > 0
        cost[ok] *= cnt[ok]
    if not ok.any():
        return True, best, side, floored, 0.0
    total_cost = float(cost[ok].sum())
    if budget is not None and total_cost > budget:
        return False, best, side, floored, total_cost

    sel = np.flatnonzero(ok)
    if budget is not None:
        best = _enumerate_blocks(indexes, anchor_keys, neighbor_keys, sel, metric, best)
    else:
        for a in sel:
            block = [indexes[0].points_in_cell(int(anchor_keys[a]))]
            for idx in indexes[1:]:
                parts = [idx.points_in_cell(int(nk[a])) for nk in neighbor_keys]
                block.append(np.concatenate(parts))
            val = _tuple_min_diameter(block, metric)
            if val < best:
                best = val
    return True, best, side, floored, total_cost


def shortest_distance_fast(
    orbits: OrbitSet,
    n: int,
    *,
    small_cutoff: int = 256,
    pass_budget: float = 32_768.0,
) -> float:
    """Exactly :func:`shortest_distance_bruteforce`, via the grid search.

    Instances with fewer than ``small_cutoff`` total points fall back to
    brute force (grid construction does not amortise there).  The cell
    side starts at the diameter of the k initial points and halves; a
    scan whose candidate neighbourhoods would cost more than
    ``pass_budget`` tuple evaluations is skipped in favour of a finer
    one, and the returned value always comes from a complete scan at a
    side that covers it.  Adversarially clustered data can degrade the
    final scan to brute-force cost, never to an inexact answer.
    """
    window = orbits._window(n)
    k = orbits.k
    if k * n < small_cutoff:
        return shortest_distance_bruteforce(orbits, n)

    best = kdiameter(window[:, 0, :], orbits.metric)
    if best == 0.0:
        return 0.0
    # Duplicates inside an orbit never change the minimum; a point common
    # to all orbits makes it exactly 0.
    points = [np.unique(window[l], axis=0) for l in range(k)]
    if _have_common_point(points):
        return 0.0

    def _final(scan_r: float, current: float) -> float:
        _, val, side, _, _ = _grid_pass(points, orbits.metric, scan_r, current, None)
        if val <= side:
            return val
        # No tuple within `side`; one unbudgeted scan at the achieved
        # bound is guaranteed to cover the optimum.
        _, val, _, _, _ = _grid_pass(points, orbits.metric, val, val, None)
        return val

    # Occupancy cost scales like r^(dim*(k-1)); when a scan is far over
    # budget, skip the halvings whose scans would certainly be skipped too.
    cost_exp = orbits.metric.dim * (k - 1)
    r = best
    while True:
        complete, best, side, floored, cost = _grid_pass(
            points, orbits.metric, r, best, pass_budget
        )
        if complete:
            if best <= side:
                return best
            return _final(best, best)
        if floored:
            return _final(r, best)
        halvings = 1
        if cost > pass_budget > 0:
            halvings = max(1, min(8, int(math.log2(cost / pass_budget) / cost_exp)))
        r *= 0.5**halvings


def count_close_tuples(orbits: OrbitSet, r: float, n: int) -> int:
    """Number of index tuples whose k points are pairwise within r (strict).

    Strict comparison makes ``count >= 1`` equivalent to
    ``shortest_distance < r`` exactly.
    """
    if r <= 0.0:
        raise ValueError("radius must be positive")
    window = orbits._window(n)
    k = orbits.k
    if k == 2:
        total = 0
        chunk = max(1, _CHUNK_ELEMENTS // max(1, n))
        a, b = window[0], window[1]
        for lo in range(0, n, chunk):
            d = pairwise_distance(orbits.metric, a[lo : lo + chunk, None, :], b[None, :, :])
            total += int((d < r).sum())
        return total
    if n**k > _BRUTE_MAX_ELEMENTS:
        raise NTooLarge(f"counting over {n}^{k} tuples exceeds the size guard")
    running = np.ones(n, dtype=bool)
    for j in range(1, k):
        running = np.broadcast_to(running[..., None], running.shape + (n,)).copy()
        for l in range(j):
            d = pairwise_distance(orbits.metric, window[l][:, None, :], window[j][None, :, :])
            view = (1,) * l + (n,) + (1,) * (j - l - 1) + (n,)
            running &= (d < r).reshape(view)
    return int(running.sum())


def observed_metric(obs: ObservationSpec, metric: MetricSpec) -> MetricSpec:
    """Metric on the observation's image space.

    Projections inherit the flavour with the reduced dimension; affine
    images live in a plain box (a scaled circle is not the unit torus).
    """
    if isinstance(obs, Identity):
        return metric
    if isinstance(obs, CoordinateProjection):
        return type(metric)(len(obs.indices))
    if isinstance(obs, AffineObservation):
        return EuclideanBox(metric.dim)
    raise TypeError(f"unknown observation {obs!r}")


def observed_orbit_set(orbits: OrbitSet, obs: ObservationSpec) -> OrbitSet:
    """Apply an observation pointwise to every orbit."""
    observed = [observe_orbit(obs, orbits.orbits[l]) for l in range(orbits.k)]
    return OrbitSet.from_arrays(observed, observed_metric(obs, orbits.metric))


def observed_shortest_distance(orbits: OrbitSet, obs: ObservationSpec, n: int) -> float:
    """Shortest distance between the k observed orbits."""
    return shortest_distance_fast(observed_orbit_set(orbits, obs), n)


def exponent(m_n: float, n: int) -> float:
    """``log m_n / (-log n)``; +inf sentinel when the distance degenerates to 0."""
    if n < 2:
        raise ValueError("exponent needs n >= 2")
    if m_n < 0.0:
        raise ValueError("distance must be nonnegative")
    if m_n == 0.0:
        return math.inf
    return math.log(m_n) / (-math.log(n))
