"""Config-driven experiment runner for the orbit/sequence limit laws.

An experiment draws R independent replicas of a system, evaluates one
statistic along a ladder of window sizes n, and regresses the statistic
against the abscissa in which the corresponding limit law is linear:

* shortest-distance kinds:  log m_n  vs  -log n   (slope -> k/((k-1) D_k))
* matching kinds:           M_n, V_n vs   log n   (slope -> k/((k-1) H_k))
* dimension:                log C(r) vs   log r   (slope -> (k-1) D_k)
* entropy:                  plug-in H_k per window (converges, no slope)

Replica r of an experiment uses a generator seeded from
(master seed, kind tag, r), so runs are deterministic for a given
(config, seed) and individual replicas are reproducible in isolation.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dynamics
from .dimension import RadiiLadder, estimate_Dk, theoretical_Dk
from .distance import (
    EuclideanBox,
    MetricSpec,
    OrbitSet,
    TorusWrap,
    exponent,
    observed_orbit_set,
    shortest_distance_fast,
)
from .dynamics import (
    AffineObservation,
    CoordinateProjection,
    Identity,
    MapSpec,
    ObservationSpec,
    SkewProduct,
    invariant_orbit,
    map_dim,
)
from .errors import ConfigInvalid, GcdNotOne
from .matching import (
    BlockSubstitution,
    EncoderSpec,
    IdentityEncoder,
    LetterRepetition,
    ScrabbleSpec,
    apply_encoder,
    lcs_ladder,
    lcs_limit_constant,
    scrabble_Vn,
    scrabble_limit_constant,
)
from .symbolic import (
    MarkovModel,
    SymbolSequence,
    cylinder_counts,
    empirical_renyi,
    renyi_entropy_markov,
    sample_markov,
)

KINDS = (
    "shortest-distance",
    "observed-distance",
    "random-orbits",
    "lcs",
    "lcs-encoded",
    "scrabble",
    "dimension",
    "entropy",
)

_KIND_TAGS = {kind: i + 1 for i, kind in enumerate(KINDS)}

_DISTANCE_KINDS = ("shortest-distance", "observed-distance", "random-orbits")
_SEQUENCE_KINDS = ("lcs", "lcs-encoded", "scrabble", "entropy")

_MAP_CLASSES = (
    dynamics.MTimesMod1,
    dynamics.Beta,
    dynamics.Gauss,
    dynamics.PiecewiseDoubling,
    dynamics.TorusExpanding,
    dynamics.PiecewiseLinear,
    dynamics.SkewProduct,
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment run."""

    kind: str
    system: object  # MapSpec or MarkovModel, depending on kind
    k: int
    n_ladder: tuple
    replicas: int
    seed: int
    out: str = "results"
    label: Optional[str] = None
    metric: Optional[str] = None  # "euclidean" | "torus"; default per system
    observation: Optional[ObservationSpec] = None
    encoder: Optional[EncoderSpec] = None
    weights: Optional[tuple] = None
    radii: Optional[RadiiLadder] = None
    samples: Optional[int] = None
    cylinder_length: Optional[int] = None


@dataclass
class ExperimentResult:
    """Rows, per-window aggregates, and the regression-vs-theory summary.

    ``runtime_seconds`` is volatile bookkeeping and is never serialized;
    emitted files depend only on (config, seed).
    """

    config: ExperimentConfig
    rows: list  # (n, replica, statistic, ordinate-exponent)
    per_n: list  # dicts with per-window aggregates
    slope: float
    intercept: float
    theory: Optional[float]
    abs_error: Optional[float]
    rel_error: Optional[float]
    degenerate_rows: int = 0
    runtime_seconds: float = field(default=0.0, compare=False)


def validate_config(config: ExperimentConfig):
    if config.kind not in KINDS:
        raise ConfigInvalid(f"unknown kind {config.kind!r}; expected one of {KINDS}")
    if config.k < 2:
        raise ConfigInvalid("k must be >= 2")
    if config.replicas < 1:
        raise ConfigInvalid("replicas must be >= 1")
    ladder = tuple(config.n_ladder)
    if len(ladder) == 0 or any(n < 2 for n in ladder):
        raise ConfigInvalid("n_ladder must contain windows >= 2")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigInvalid("n_ladder must be strictly increasing")
    if config.kind in _DISTANCE_KINDS and not isinstance(config.system, _MAP_CLASSES):
        raise ConfigInvalid(f"{config.kind} needs a map system")
    if config.kind == "dimension" and not isinstance(config.system, _MAP_CLASSES):
        raise ConfigInvalid("dimension needs a map system")
    if config.kind == "random-orbits" and not isinstance(config.system, SkewProduct):
        raise ConfigInvalid("random-orbits needs a skew-product system")
    if config.kind == "observed-distance" and config.observation is None:
        raise ConfigInvalid("observed-distance needs an observation")
    if config.kind in _SEQUENCE_KINDS and not isinstance(config.system, MarkovModel):
        raise ConfigInvalid(f"{config.kind} needs a markov/bernoulli system")
    if config.kind == "lcs-encoded" and config.encoder is None:
        raise ConfigInvalid("lcs-encoded needs an encoder")
    if config.kind == "scrabble":
        if config.weights is None:
            raise ConfigInvalid("scrabble needs letter weights")
        if len(config.weights) != config.system.alphabet_size:
            raise ConfigInvalid("need one weight per letter")
    if config.kind == "dimension":
        if config.radii is None:
            raise ConfigInvalid("dimension needs a radii ladder")
        if config.samples is None or config.samples < config.k:
            raise ConfigInvalid("dimension needs samples >= k")
    if config.kind == "entropy" and config.cylinder_length is None:
        raise ConfigInvalid("entropy needs cylinder_length")
    if config.metric not in (None, "euclidean", "torus"):
        raise ConfigInvalid("metric must be 'euclidean' or 'torus'")


def resolve_metric(config: ExperimentConfig) -> MetricSpec:
    """Metric for the system's state space (before any observation)."""
    dim = map_dim(config.system)
    if config.metric == "euclidean":
        return EuclideanBox(dim)
    if config.metric == "torus":
        return TorusWrap(dim)
    if isinstance(config.system, (dynamics.TorusExpanding, SkewProduct)):
        return TorusWrap(dim)
    return EuclideanBox(dim)


def theoretical_constant(config: ExperimentConfig) -> Optional[float]:
    """Limit constant predicted for the configured system, when known."""
    k = config.k
    if config.kind in ("shortest-distance", "random-orbits"):
        d = theoretical_Dk(config.system, k)
        return None if d is None else k / ((k - 1) * d)
    if config.kind == "observed-distance":
        d = theoretical_observed_Dk(config.system, config.observation, k)
        return None if d is None else k / ((k - 1) * d)
    if config.kind == "lcs":
        return lcs_limit_constant(config.system, k)
    if config.kind == "lcs-encoded":
        if isinstance(config.encoder, IdentityEncoder):
            return lcs_limit_constant(config.system, k)
        if isinstance(config.encoder, LetterRepetition):
            try:
                spec = ScrabbleSpec(config.system, tuple(config.encoder.weights))
            except GcdNotOne:
                return None
            return scrabble_limit_constant(spec, k)
        return None
    if config.kind == "scrabble":
        return scrabble_limit_constant(ScrabbleSpec(config.system, tuple(config.weights)), k)
    if config.kind == "dimension":
        return theoretical_Dk(config.system, k)
    if config.kind == "entropy":
        return renyi_entropy_markov(config.system, k)
    return None


def theoretical_observed_Dk(spec: MapSpec, obs: ObservationSpec, k: int) -> Optional[float]:
    """Dimension of the pushforward of the invariant measure, when known.

    All supported systems carry absolutely continuous invariant measures
    of full dimension, so projections keep one dimension per retained
    coordinate and non-clamping affine maps preserve the dimension.
    Clamping creates boundary atoms, for which no constant is claimed.
    """
    base = theoretical_Dk(spec, k)
    if base is None:
        return None
    if isinstance(obs, Identity):
        return base
    if isinstance(obs, CoordinateProjection):
        if base == float(map_dim(spec)):
            return float(len(obs.indices))
        return None
    if isinstance(obs, AffineObservation):
        lo = min(obs.offset, obs.scale + obs.offset)
        hi = max(obs.offset, obs.scale + obs.offset)
        if lo >= 0.0 and hi <= 1.0:
            return base
        return None
    return None


def _replica_rng(config: ExperimentConfig, replica: int) -> np.random.Generator:
    seq = np.random.SeedSequence(
        entropy=int(config.seed), spawn_key=(_KIND_TAGS[config.kind], int(replica))
    )
    return np.random.default_rng(seq)


def _distance_rows(config: ExperimentConfig, replica: int):
    rng = _replica_rng(config, replica)
    n_max = max(config.n_ladder)
    metric = resolve_metric(config)
    orbits = [invariant_orbit(config.system, n_max, rng) for _ in range(config.k)]
    oset = OrbitSet.from_arrays(orbits, metric)
    if config.kind == "observed-distance":
        oset = observed_orbit_set(oset, config.observation)
    rows = []
    for n in config.n_ladder:
        m = shortest_distance_fast(oset, n)
        rows.append((int(n), replica, float(m), exponent(m, n)))
    return rows, None


def _sequence_rows(config: ExperimentConfig, replica: int):
    rng = _replica_rng(config, replica)
    n_max = max(config.n_ladder)
    seqs = [sample_markov(config.system, n_max, rng) for _ in range(config.k)]
    rows = []
    if config.kind == "lcs":
        values = lcs_ladder(seqs, config.n_ladder)
        for n, v in zip(config.n_ladder, values):
            rows.append((int(n), replica, int(v), v / math.log(n)))
    elif config.kind == "lcs-encoded":
        encoded = [apply_encoder(config.encoder, s) for s in seqs]
        values = lcs_ladder(encoded, config.n_ladder)
        for n, v in zip(config.n_ladder, values):
            rows.append((int(n), replica, int(v), v / math.log(n)))
    elif config.kind == "scrabble":
        for n in config.n_ladder:
            v = scrabble_Vn(seqs, config.weights, n)
            rows.append((int(n), replica, int(v), v / math.log(n)))
    elif config.kind == "entropy":
        ell = config.cylinder_length
        for n in config.n_ladder:
            prefix = SymbolSequence(seqs[0].symbols[:n], seqs[0].alphabet_size)
            h = empirical_renyi(cylinder_counts(prefix, ell), config.k)
            rows.append((int(n), replica, float(h), float(h)))
    return rows, None


def _dimension_rows(config: ExperimentConfig, replica: int):
    rng = _replica_rng(config, replica)
    metric = resolve_metric(config)
    pts = dynamics.sample_invariant(config.system, rng, size=config.samples)
    est = estimate_Dk(pts, config.radii, config.k, metric)
    rows = []
    for j, (r, c) in enumerate(zip(est.all_radii, est.all_correlations)):
        local = math.log(c) / ((config.k - 1) * math.log(r)) if 0 < c < 1 else math.inf
        rows.append((int(j), replica, float(c), local))
    return rows, float(est.dimension)


def _run_replica(args):
    config, replica = args
    if config.kind in _DISTANCE_KINDS:
        return _distance_rows(config, replica)
    if config.kind == "dimension":
        return _dimension_rows(config, replica)
    return _sequence_rows(config, replica)


def _aggregate(config: ExperimentConfig, rows, replica_dims):
    """Per-window means and the regression summary."""
    k = config.k
    by_n = {}
    for n, _, stat, expo in rows:
        by_n.setdefault(n, []).append((stat, expo))
    degenerate = 0
    per_n = []
    xs, ys = [], []
    for n in sorted(by_n):
        stats = np.array([s for s, _ in by_n[n]], dtype=float)
        if config.kind in _DISTANCE_KINDS:
            good = stats > 0.0
            degenerate += int((~good).sum())
            ordinates = np.log(stats[good]) if good.any() else np.array([])
            x = -math.log(n)
        elif config.kind == "dimension":
            ordinates = np.log(stats)
            x = math.log(config.radii.radii[n])
        else:
            ordinates = stats
            x = math.log(n)
        entry = {
            "n": int(n),
            "mean_statistic": float(stats.mean()),
            "sem_statistic": float(stats.std(ddof=1) / math.sqrt(stats.size))
            if stats.size > 1
            else 0.0,
            "replicas_used": int(stats.size),
        }
        if ordinates.size:
            entry["mean_ordinate"] = float(ordinates.mean())
            entry["sem_ordinate"] = (
                float(ordinates.std(ddof=1) / math.sqrt(ordinates.size))
                if ordinates.size > 1
                else 0.0
            )
            entry["abscissa"] = float(x)
            xs.append(x)
            ys.append(entry["mean_ordinate"])
        per_n.append(entry)

    if config.kind == "dimension":
        dims = np.array([d for d in replica_dims if d is not None], dtype=float)
        slope = float(dims.mean())
        intercept = 0.0
    elif config.kind == "entropy":
        slope = per_n[-1]["mean_ordinate"]
        intercept = 0.0
    elif len(xs) >= 2:
        coef = np.polyfit(np.array(xs), np.array(ys), 1)
        slope, intercept = float(coef[0]), float(coef[1])
    elif len(xs) == 1:
        slope, intercept = ys[0] / xs[0], 0.0
    else:
        slope, intercept = math.nan, 0.0
    return per_n, slope, intercept, degenerate


def run(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Execute all replicas and summarise against the predicted constant.

    Deterministic for a given (config, seed): replicas own independent
    generators, results are collected in (n, replica) order, and the
    thread count only affects wall time.
    """
    validate_config(config)
    start = time.perf_counter()
    jobs = [(config, r) for r in range(config.replicas)]
    if threads > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_replica, jobs))
    else:
        outcomes = [_run_replica(j) for j in jobs]
    rows = [row for out, _ in outcomes for row in out]
    rows.sort(key=lambda row: (row[0], row[1]))
    replica_dims = [extra for _, extra in outcomes]
    per_n, slope, intercept, degenerate = _aggregate(config, rows, replica_dims)
    theory = theoretical_constant(config)
    abs_error = None if theory is None else abs(slope - theory)
    rel_error = (
        None if theory is None or theory == 0.0 else abs(slope - theory) / abs(theory)
    )
    return ExperimentResult(
        config=config,
        rows=rows,
        per_n=per_n,
        slope=slope,
        intercept=intercept,
        theory=theory,
        abs_error=abs_error,
        rel_error=rel_error,
        degenerate_rows=degenerate,
        runtime_seconds=time.perf_counter() - start,
    )
