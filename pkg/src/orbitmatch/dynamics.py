"""Interval and torus maps, their invariant measures, and orbit generators.

The deterministic systems here are the classical uniformly expanding
examples: m-ary maps ``x -> m*x mod 1``, beta maps ``x -> beta*x mod 1``
with their absolutely continuous invariant density, the Gauss map
``x -> frac(1/x)``, a countable-branch doubling map, and coordinatewise
expanding maps of the N-torus.  Random compositions are modelled as a
skew product: a driving interval map advances a parameter ``omega`` and a
threshold partition of [0, 1] selects which fiber map acts at each step.

Orbit generation comes in two flavours:

* :func:`orbit` iterates the map from a user-supplied point in plain
  double precision.  For the dyadic/m-ary maps this collapses after
  roughly ``52 / log2(m)`` steps (each step discards mantissa bits), so
  it is only suitable for short horizons.
* :func:`invariant_orbit` draws an orbit *in law* from the invariant
  measure.  For m-ary, torus-expanding and the countable doubling map it
  reconstructs points from a lazily extended i.i.d. digit stream, which
  is exact in law under Lebesgue and immune to floating-point collapse.
  The remaining systems use pseudo-orbits (sample the invariant measure,
  then iterate), which is adequate for the distributional statistics
  computed downstream.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, GaussAtZero, SelectorGap

# Number of digits used to reconstruct a point from its digit stream.
# Base >= 2, so 64 digits always exceed double-precision resolution.
_DIGIT_WINDOW = 64

_BELOW_ONE = np.nextafter(1.0, 0.0)


# ---------------------------------------------------------------------------
# map specifications


@dataclass(frozen=True)
class MTimesMod1:
    """``x -> m*x mod 1`` on [0, 1); Lebesgue is invariant."""

    m: int

    def __post_init__(self):
        if not (isinstance(self.m, (int, np.integer)) and self.m >= 2):
            raise ValueError(f"m must be an integer >= 2, got {self.m!r}")


@dataclass(frozen=True)
class Beta:
    """``x -> beta*x mod 1`` with its absolutely continuous invariant density.

    The invariant density rho satisfies ``1 - 1/beta <= rho <= (1 - 1/beta)^-1``
    and is evaluated exactly from the orbit of 1 (see :func:`beta_invariant_density`).
    """

    beta: float

    def __post_init__(self):
        if not self.beta > 1.0:
            raise ValueError(f"beta must be > 1, got {self.beta!r}")


@dataclass(frozen=True)
class Gauss:
    """Gauss map ``x -> frac(1/x)`` with density ``1 / ((1+x) log 2)``."""


@dataclass(frozen=True)
class PiecewiseDoubling:
    """Countable-branch map ``x -> 2^j x - 1`` on ``[2^-j, 2^-j+1)``; Lebesgue-invariant.

    Branches are taken half-open on the left so the range stays inside
    [0, 1); this differs from the closed-right convention only on a
    Lebesgue-null set of dyadic endpoints.
    """


@dataclass(frozen=True)
class TorusExpanding:
    """Coordinatewise ``x -> factor*x mod 1`` on the N-torus; Lebesgue-invariant."""

    dim: int
    factor: int

    def __post_init__(self):
        if not (isinstance(self.dim, (int, np.integer)) and self.dim >= 1):
            raise ValueError(f"dim must be an integer >= 1, got {self.dim!r}")
        if not (isinstance(self.factor, (int, np.integer)) and self.factor >= 2):
            raise ValueError(f"factor must be an integer >= 2, got {self.factor!r}")


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise linear interval map with finitely many branches.

    Branch i acts on ``[b_i, b_{i+1})`` (with b_0 = 0, b_last = 1) as
    ``x -> slope_i * x + offset_i``.  Used as the driving map of skew
    products; Lebesgue invariance is the caller's responsibility.
    """

    breakpoints: tuple  # interior breakpoints, strictly increasing in (0, 1)
    slopes: tuple
    offsets: tuple

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        if any(not 0.0 < b < 1.0 for b in bp):
            raise ValueError("interior breakpoints must lie in (0, 1)")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.slopes) != len(bp) + 1 or len(self.offsets) != len(bp) + 1:
            raise ValueError("need one (slope, offset) pair per branch")


IntervalMap = Union[MTimesMod1, Beta, Gauss, PiecewiseDoubling, PiecewiseLinear]


@dataclass(frozen=True)
class SkewProduct:
    """Random composition of fiber maps driven by a base interval map.

    At each step the driving value ``omega`` selects a fiber map through
    the threshold partition (cell i is ``[t_{i-1}, t_i)``, the last cell
    closed on the right at 1) and is then advanced by the base map.
    """

    base: IntervalMap
    thresholds: tuple
    fibers: tuple

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        if any(not 0.0 < t < 1.0 for t in th):
            raise ValueError("selector thresholds must lie in (0, 1)")
        if any(t2 <= t1 for t1, t2 in zip(th, th[1:])):
            raise ValueError("selector thresholds must be strictly increasing")
        if len(self.fibers) != len(th) + 1:
            raise ValueError("need exactly one fiber map per selector cell")
        if isinstance(self.base, SkewProduct) or any(
            isinstance(f, SkewProduct) for f in self.fibers
        ):
            raise ValueError("skew products do not nest")
        dims = {map_dim(f) for f in self.fibers}
        if len(dims) != 1:
            raise ValueError("all fiber maps must share one dimension")


MapSpec = Union[IntervalMap, SkewProduct]


def skew_2x_3x() -> SkewProduct:
    """Skew product mixing the circle maps 2x and 3x (threshold 2/5).

    The driver is a four-branch Lebesgue-preserving piecewise linear map,
    so the orbit statistics are those of a non-i.i.d. random composition
    of the two expanding maps.
    """
    driver = PiecewiseLinear(
        breakpoints=(0.2, 0.4, 0.6),
        slopes=(2.0, 3.0, 2.0, 1.5),
        offsets=(0.0, -0.2, -0.8, -0.5),
    )
    return SkewProduct(base=driver, thresholds=(0.4,), fibers=(MTimesMod1(2), MTimesMod1(3)))


def map_dim(spec: MapSpec) -> int:
    """State-space dimension of a map (fiber dimension for skew products)."""
    if isinstance(spec, TorusExpanding):
        return spec.dim
    if isinstance(spec, SkewProduct):
        return map_dim(spec.fibers[0])
    return 1


# ---------------------------------------------------------------------------
# single-step dynamics


def _check_unit_interval(x: float) -> float:
    x = float(x)
    if not 0.0 <= x < 1.0:
        raise DimensionMismatch(f"point {x!r} outside [0, 1)")
    return x


def step(spec: MapSpec, x):
    """Apply the map once.  Interval maps take/return floats; torus maps arrays."""
    if isinstance(spec, MTimesMod1):
        return (spec.m * _check_unit_interval(x)) % 1.0
    if isinstance(spec, Beta):
        return (spec.beta * _check_unit_interval(x)) % 1.0
    if isinstance(spec, Gauss):
        x = _check_unit_interval(x)
        if x == 0.0:
            raise GaussAtZero("Gauss map is undefined at 0; resample the point")
        return (1.0 / x) % 1.0
    if isinstance(spec, PiecewiseDoubling):
        x = _check_unit_interval(x)
        if x == 0.0:
            return 0.0
        mant, _ = np.frexp(x)  # x = mant * 2**e with mant in [0.5, 1)
        return min(2.0 * float(mant) - 1.0, _BELOW_ONE)
    if isinstance(spec, PiecewiseLinear):
        x = _check_unit_interval(x)
        i = bisect.bisect_right(spec.breakpoints, x)
        y = spec.slopes[i] * x + spec.offsets[i]
        return min(max(y, 0.0), _BELOW_ONE)
    if isinstance(spec, TorusExpanding):
        pt = np.asarray(x, dtype=float)
        if pt.shape != (spec.dim,):
            raise DimensionMismatch(f"expected shape ({spec.dim},), got {pt.shape}")
        if np.any(pt < 0.0) or np.any(pt >= 1.0):
            raise DimensionMismatch("coordinates outside [0, 1)")
        return (spec.factor * pt) % 1.0
    if isinstance(spec, SkewProduct):
        raise TypeError("use random_orbit/skew_step for skew products (state is (omega, x))")
    raise TypeError(f"unknown map spec {spec!r}")


def step_many(spec: MapSpec, pts: np.ndarray) -> np.ndarray:
    """Vectorised :func:`step` over an array of points.

    ``pts`` has shape (M,) for interval maps or (M, N) for torus maps.
    The Gauss map maps exact zeros to 0.0 (a Lebesgue-null event) instead
    of raising, so bulk invariance checks do not trip on it.
    """
    pts = np.asarray(pts, dtype=float)
    if isinstance(spec, MTimesMod1):
        return (spec.m * pts) % 1.0
    if isinstance(spec, Beta):
        return (spec.beta * pts) % 1.0
    if isinstance(spec, Gauss):
        out = np.zeros_like(pts)
        nz = pts > 0.0
        out[nz] = (1.0 / pts[nz]) % 1.0
        return out
    if isinstance(spec, PiecewiseDoubling):
        mant, _ = np.frexp(pts)
        out = 2.0 * mant - 1.0
        out[pts == 0.0] = 0.0
        return np.minimum(out, _BELOW_ONE)
    if isinstance(spec, PiecewiseLinear):
        idx = np.searchsorted(np.asarray(spec.breakpoints), pts, side="right")
        out = np.asarray(spec.slopes)[idx] * pts + np.asarray(spec.offsets)[idx]
        return np.clip(out, 0.0, _BELOW_ONE)
    if isinstance(spec, TorusExpanding):
        return (spec.factor * pts) % 1.0
    raise TypeError(f"step_many does not support {spec!r}")


def fiber_at(skew: SkewProduct, omega: float) -> MapSpec:
    """Fiber map selected by a driving value in [0, 1]."""
    if not 0.0 <= omega <= 1.0:
        raise SelectorGap(f"driving value {omega!r} outside [0, 1]")
    return skew.fibers[bisect.bisect_right(skew.thresholds, omega)]


# ---------------------------------------------------------------------------
# orbits


def orbit(spec: MapSpec, x0, n: int) -> np.ndarray:
    """Iterate the map: ``out[0] = x0``, ``out[i+1] = step(spec, out[i])``.

    Plain double-precision iteration; see the module docstring for the
    precision caveats on dyadic maps.
    """
    if n < 1:
        raise ValueError("orbit length must be >= 1")
    if isinstance(spec, SkewProduct):
        raise TypeError("skew products need a driving value; use random_orbit")
    if isinstance(spec, TorusExpanding):
        out = np.empty((n, spec.dim), dtype=float)
        out[0] = np.asarray(x0, dtype=float)
        for i in range(n - 1):
            out[i + 1] = step(spec, out[i])
        return out
    out = np.empty(n, dtype=float)
    out[0] = float(x0)
    for i in range(n - 1):
        out[i + 1] = step(spec, out[i])
    return out


def random_orbit(skew: SkewProduct, omega0: float, x0, n: int) -> np.ndarray:
    """Fiber orbit of the skew product: composes the selected fiber maps.

    ``out[0] = x0`` and ``out[i+1] = T_{omega_i}(out[i])`` with the
    driving value advanced by the base map each step.
    """
    if n < 1:
        raise ValueError("orbit length must be >= 1")
    fdim = map_dim(skew)
    if fdim == 1:
        out = np.empty(n, dtype=float)
        out[0] = float(x0)
    else:
        out = np.empty((n, fdim), dtype=float)
        out[0] = np.asarray(x0, dtype=float)
    omega = float(omega0)
    for i in range(n - 1):
        fiber = fiber_at(skew, omega)
        out[i + 1] = step(fiber, out[i])
        omega = step(skew.base, omega)
    return out


def _digit_points(digits: np.ndarray, starts: np.ndarray, base: int) -> np.ndarray:
    """Reconstruct points from windows of ``_DIGIT_WINDOW`` digits."""
    weights = float(base) ** -np.arange(1, _DIGIT_WINDOW + 1)
    windows = sliding_window_view(digits, _DIGIT_WINDOW)
    return windows[starts].astype(float) @ weights


def _skew_orbit_exact(skew: SkewProduct, omega0: float, n: int, rng) -> np.ndarray:
    """Fiber orbit for m-ary fibers via exact fixed-point integer arithmetic.

    Double-precision iteration of m-ary fibers collapses: multiplying a
    dyadic rational by an odd factor never rounds, and each factor of two
    shortens the binary expansion, so pseudo-orbits hit exact dyadics
    within ~130 steps.  Iterating the numerator of x = X / 2^W with
    W = 64 + n * max_2adic(m) bits of headroom keeps every step exact and
    the top 53 bits Lebesgue-distributed.
    """
    consume = max((f.m & -f.m).bit_length() - 1 for f in skew.fibers)  # 2-adic valuation
    width = 64 + max(1, consume) * n
    x_num = int.from_bytes(rng.bytes(width // 8 + 8), "little") % (1 << width)
    mask = (1 << width) - 1
    top = width - 53
    omega = float(omega0)
    out = np.empty(n, dtype=float)
    for i in range(n):
        out[i] = float(x_num >> top) * 2.0**-53
        if i + 1 < n:
            fiber = fiber_at(skew, omega)
            x_num = (fiber.m * x_num) & mask
            omega = step(skew.base, omega)
    return out


def invariant_orbit(spec: MapSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Orbit of length n whose points are distributed per the invariant measure.

    m-ary, torus-expanding and countable-doubling orbits come from i.i.d.
    digit streams (exact in law); the rest are pseudo-orbits started from
    an invariant-measure sample.  Skew products draw the driving value
    uniformly on [0, 1] and the fiber point from the fiber's invariant
    measure.
    """
    if n < 1:
        raise ValueError("orbit length must be >= 1")
    if isinstance(spec, MTimesMod1):
        digits = rng.integers(0, spec.m, size=n + _DIGIT_WINDOW)
        return _digit_points(digits, np.arange(n), spec.m)
    if isinstance(spec, TorusExpanding):
        digits = rng.integers(0, spec.factor, size=(spec.dim, n + _DIGIT_WINDOW))
        out = np.empty((n, spec.dim), dtype=float)
        idx = np.arange(n)
        for d in range(spec.dim):
            out[:, d] = _digit_points(digits[d], idx, spec.factor)
        return out
    if isinstance(spec, PiecewiseDoubling):
        # The map shifts the binary stream past its leading 1, so orbit
        # point t starts right after the t-th one-bit of the stream.
        bits = rng.integers(0, 2, size=2 * n + 8 * int(np.sqrt(n)) + 2 * _DIGIT_WINDOW)
        ones = np.flatnonzero(bits)
        while ones.size < n or (n > 1 and ones[n - 2] + 1 + _DIGIT_WINDOW > bits.size):
            bits = np.concatenate([bits, rng.integers(0, 2, size=n + 2 * _DIGIT_WINDOW)])
            ones = np.flatnonzero(bits)
        starts = np.empty(n, dtype=np.int64)
        starts[0] = 0
        starts[1:] = ones[: n - 1] + 1
        return _digit_points(bits, starts, 2)
    if isinstance(spec, SkewProduct):
        omega0 = rng.random()
        if all(isinstance(f, MTimesMod1) for f in spec.fibers):
            return _skew_orbit_exact(spec, omega0, n, rng)
        x0 = sample_invariant(spec, rng)
        return random_orbit(spec, omega0, x0, n)
    if isinstance(spec, Beta) and float(spec.beta).is_integer():
        # integer beta is the m-ary map; route to the exact digit stream
        return invariant_orbit(MTimesMod1(int(spec.beta)), n, rng)
    if isinstance(spec, Gauss):
        for _ in range(64):
            try:
                return orbit(spec, sample_invariant(spec, rng), n)
            except GaussAtZero:
                continue  # measure-zero hit; resample
        raise GaussAtZero("Gauss orbit kept hitting 0; generator looks degenerate")
    return orbit(spec, sample_invariant(spec, rng), n)


# ---------------------------------------------------------------------------
# invariant-measure sampling


@lru_cache(maxsize=64)
def _beta_one_orbit(beta: float):
    """Orbit of 1 under the beta map with the geometric weights beta^-j.

    Returns (orbit values t_j, weights beta^-j, normalisation Z) where the
    invariant density is ``rho(x) = (1/Z) * sum_j beta^-j * [x < t_j]``.
    """
    tvals = [1.0]
    t = (beta * 1.0) % 1.0
    w = 1.0 / beta
    while w > 1e-18 and t > 0.0:
        tvals.append(t)
        t = (beta * t) % 1.0
        w /= beta
    t_arr = np.asarray(tvals)
    w_arr = float(beta) ** -np.arange(len(tvals))
    z = float(w_arr @ t_arr)
    return t_arr, w_arr, z


def beta_invariant_density(beta: float, x) -> np.ndarray:
    """Invariant density of the beta map, evaluated pointwise on [0, 1)."""
    t_arr, w_arr, z = _beta_one_orbit(float(beta))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dens = (np.less.outer(x, t_arr) * w_arr).sum(axis=1) / z
    return dens


def beta_invariant_cdf(beta: float, x) -> np.ndarray:
    """CDF of the beta map's invariant measure (piecewise linear)."""
    t_arr, w_arr, z = _beta_one_orbit(float(beta))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return (np.minimum.outer(x, t_arr) * w_arr).sum(axis=1) / z


def sample_invariant(spec: MapSpec, rng: np.random.Generator, size: int | None = None):
    """Draw from the map's invariant measure.

    Lebesgue for the m-ary, doubling, piecewise-linear and torus maps;
    the exact absolutely continuous density (via rejection below the
    envelope ``(1 - 1/beta)^-1``) for beta maps; the inverse-CDF formula
    ``x = 2^U - 1`` for the Gauss measure.  Skew products return a fiber
    sample (the marginal on the fiber is Lebesgue for the expanding
    fibers supported here); the driving value is sampled separately,
    uniformly on [0, 1].
    """
    scalar = size is None
    m = 1 if scalar else int(size)
    if isinstance(spec, (MTimesMod1, PiecewiseDoubling, PiecewiseLinear)):
        out = rng.random(m)
    elif isinstance(spec, TorusExpanding):
        out = rng.random((m, spec.dim))
        return out[0] if scalar else out
    elif isinstance(spec, Gauss):
        out = np.exp2(rng.random(m)) - 1.0
        out = np.minimum(out, _BELOW_ONE)
    elif isinstance(spec, Beta):
        accept_scale = 1.0 - 1.0 / spec.beta
        chunks = []
        need = m
        while need > 0:
            batch = max(64, int(need / accept_scale) + 16)
            xs = rng.random(batch)
            us = rng.random(batch)
            kept = xs[us <= beta_invariant_density(spec.beta, xs) * accept_scale]
            chunks.append(kept[:need])
            need -= chunks[-1].size
        out = np.concatenate(chunks)
    elif isinstance(spec, SkewProduct):
        fdim = map_dim(spec)
        out = rng.random(m) if fdim == 1 else rng.random((m, fdim))
        if fdim > 1:
            return out[0] if scalar else out
    else:
        raise TypeError(f"unknown map spec {spec!r}")
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# observations


@dataclass(frozen=True)
class Identity:
    """Observation that returns the state unchanged."""


@dataclass(frozen=True)
class CoordinateProjection:
    """Keep a subset of coordinates (1-Lipschitz)."""

    indices: tuple

    def __post_init__(self):
        if len(self.indices) == 0:
            raise ValueError("projection needs at least one coordinate index")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("projection indices must be distinct")


@dataclass(frozen=True)
class AffineObservation:
    """``x -> scale*x + offset`` per coordinate, clamped back into [0, 1)."""

    scale: float
    offset: float

    def __post_init__(self):
        if self.scale == 0.0:
            raise ValueError("affine scale must be nonzero")


ObservationSpec = Union[Identity, CoordinateProjection, AffineObservation]


def lipschitz_constant(obs: ObservationSpec) -> float:
    """Lipschitz constant of the observation (clamping never increases it)."""
    if isinstance(obs, AffineObservation):
        return abs(obs.scale)
    return 1.0


def observe(obs: ObservationSpec, x):
    """Apply an observation to one point (float or coordinate array)."""
    if isinstance(obs, Identity):
        return x
    if isinstance(obs, CoordinateProjection):
        pt = np.atleast_1d(np.asarray(x, dtype=float))
        if max(obs.indices) >= pt.shape[-1]:
            raise DimensionMismatch(
                f"projection indices {obs.indices} out of range for dim {pt.shape[-1]}"
            )
        out = pt[list(obs.indices)]
        return float(out[0]) if out.size == 1 else out
    if isinstance(obs, AffineObservation):
        y = obs.scale * np.asarray(x, dtype=float) + obs.offset
        y = np.clip(y, 0.0, _BELOW_ONE)
        return float(y) if y.ndim == 0 else y
    raise TypeError(f"unknown observation {obs!r}")


def observe_orbit(obs: ObservationSpec, pts: np.ndarray) -> np.ndarray:
    """Apply an observation to every point of an (n,) or (n, N) orbit."""
    pts = np.asarray(pts, dtype=float)
    if isinstance(obs, Identity):
        return pts
    if isinstance(obs, CoordinateProjection):
        if pts.ndim == 1:
            pts = pts[:, None]
        if max(obs.indices) >= pts.shape[1]:
            raise DimensionMismatch(
                f"projection indices {obs.indices} out of range for dim {pts.shape[1]}"
            )
        return pts[:, list(obs.indices)]
    if isinstance(obs, AffineObservation):
        return np.clip(obs.scale * pts + obs.offset, 0.0, _BELOW_ONE)
    raise TypeError(f"unknown observation {obs!r}")
