"""Markov/Bernoulli symbol sources, cylinder counts and Renyi entropies.

For an irreducible aperiodic chain with transition matrix P, the matrix
P(k) with entries P_ij^k has a dominant eigenvalue lambda_k, and the
order-k Renyi entropy of the chain is H_k = -log(lambda_k) / (k-1).
Bernoulli (i.i.d.) sources admit the closed form
H_k = -log(sum_i p_i^k) / (k-1); empirical estimates come from sliding-
window cylinder counts of a single long sample path.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    CylinderTooLong,
    EmptyTable,
    InvalidDistribution,
    NoConvergence,
    NotAperiodic,
    NotIrreducible,
)

_ROW_SUM_TOL = 1e-12
_STATIONARY_TOL = 1e-12
_POWER_TOL = 1e-12
_POWER_MAX_ITER = 100_000
_DIRECT_SOLVE_MAX = 8

try:  # optional: identical results either way, the kernel only compares floats
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


@dataclass(eq=False)
class SymbolSequence:
    """Finite-alphabet sequence; symbols are integers in [0, alphabet_size)."""

    symbols: np.ndarray
    alphabet_size: int

    def __post_init__(self):
        arr = np.asarray(self.symbols, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("symbols must be a 1-D array")
        if self.alphabet_size < 2:
            raise ValueError("alphabet size must be >= 2")
        if arr.size and (arr.min() < 0 or arr.max() >= self.alphabet_size):
            raise ValueError("symbols out of alphabet range")
        self.symbols = arr

    def __len__(self) -> int:
        return self.symbols.size


def _support_strongly_connected(P: np.ndarray) -> bool:
    a = P.shape[0]
    adj = P > 0.0
    reach = np.eye(a, dtype=bool)
    for _ in range(a):
        new = reach | (reach @ adj)
        if (new == reach).all():
            break
        reach = new
    return bool(reach.all())


def _support_period(P: np.ndarray) -> int:
    """gcd of cycle lengths of the (strongly connected) support graph."""
    a = P.shape[0]
    adj = [np.flatnonzero(P[i] > 0.0) for i in range(a)]
    depth = np.full(a, -1, dtype=np.int64)
    depth[0] = 0
    order = [0]
    head = 0
    g = 0
    while head < len(order):
        u = order[head]
        head += 1
        for v in adj[u]:
            if depth[v] < 0:
                depth[v] = depth[u] + 1
                order.append(int(v))
            else:
                g = math.gcd(g, int(depth[u] + 1 - depth[v]))
    return g if g > 0 else 0


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary row vector: pi @ P = pi, sum(pi) = 1, pi >= 0.

    Direct linear solve for alphabets up to 8 states, power iteration to
    1e-12 beyond that.
    """
    P = np.asarray(P, dtype=float)
    _validate_stochastic(P)
    if not _support_strongly_connected(P):
        raise NotIrreducible("support graph is not strongly connected")
    a = P.shape[0]
    if a <= _DIRECT_SOLVE_MAX:
        lhs = P.T - np.eye(a)
        lhs[-1, :] = 1.0
        rhs = np.zeros(a)
        rhs[-1] = 1.0
        pi = np.linalg.solve(lhs, rhs)
    else:
        pi = np.full(a, 1.0 / a)
        for _ in range(_POWER_MAX_ITER):
            nxt = pi @ P
            nxt /= nxt.sum()
            if np.abs(nxt - pi).max() <= _STATIONARY_TOL:
                pi = nxt
                break
            pi = nxt
        else:
            raise NoConvergence("stationary power iteration did not converge")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _validate_stochastic(P: np.ndarray):
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidDistribution("transition matrix must be square")
    if P.shape[0] < 2:
        raise InvalidDistribution("alphabet size must be >= 2")
    if (P < -1e-15).any() or (P > 1.0 + 1e-12).any():
        raise InvalidDistribution("transition entries must lie in [0, 1]")
    if np.abs(P.sum(axis=1) - 1.0).max() > _ROW_SUM_TOL:
        raise InvalidDistribution("rows must sum to 1 within 1e-12")


@dataclass(eq=False)
class MarkovModel:
    """Stochastic matrix with cached stationary law and mixing flags.

    Construction requires irreducibility (otherwise the stationary law is
    not unique); aperiodicity is recorded as a flag and enforced by the
    operations that need mixing.
    """

    matrix: np.ndarray
    stationary: np.ndarray = None
    irreducible: bool = None
    aperiodic: bool = None

    def __post_init__(self):
        P = np.asarray(self.matrix, dtype=float)
        _validate_stochastic(P)
        self.matrix = P
        self.irreducible = _support_strongly_connected(P)
        if not self.irreducible:
            raise NotIrreducible("support graph is not strongly connected")
        self.aperiodic = _support_period(P) == 1
        self.stationary = stationary_distribution(P)

    @property
    def alphabet_size(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def bernoulli(cls, p) -> "MarkovModel":
        """i.i.d. source as the rank-one chain with constant rows."""
        p = np.asarray(p, dtype=float)
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidDistribution("probabilities must be nonnegative and sum to 1")
        if (p == 0).any():
            raise NotIrreducible("zero-probability letters make the chain reducible")
        return cls(np.tile(p, (p.size, 1)))


def _require_mixing(model: MarkovModel):
    if not model.irreducible:
        raise NotIrreducible("chain must be irreducible")
    if not model.aperiodic:
        raise NotAperiodic("chain must be aperiodic")


def _markov_path_python(cum: np.ndarray, us: np.ndarray, x0: int) -> np.ndarray:
    out = np.empty(us.size + 1, dtype=np.int64)
    out[0] = x0
    x = x0
    for t in range(us.size):
        u = us[t]
        row = cum[x]
        c = 0
        while row[c] <= u:
            c += 1
        x = c
        out[t + 1] = x
    return out


if _HAVE_NUMBA:
    _markov_path_fast = _njit(cache=True)(_markov_path_python)
else:  # pragma: no cover
    _markov_path_fast = _markov_path_python


def sample_markov(model: MarkovModel, n: int, rng: np.random.Generator) -> SymbolSequence:
    """Stationary sample path: x_0 ~ pi, x_{t+1} ~ P[x_t, .]."""
    _require_mixing(model)
    if n < 1:
        raise ValueError("sequence length must be >= 1")
    cum = np.cumsum(model.matrix, axis=1)
    cum[:, -1] = 1.0 + 1e-12  # guard the top bin against rounding
    pi_cum = np.cumsum(model.stationary)
    x0 = int(np.searchsorted(pi_cum, rng.random(), side="right"))
    x0 = min(x0, model.alphabet_size - 1)
    us = rng.random(n - 1)
    path = _markov_path_fast(cum, us, x0)
    return SymbolSequence(path, model.alphabet_size)


def perron_eigenvalue(M: np.ndarray, tol: float = _POWER_TOL, max_iter: int = _POWER_MAX_ITER) -> float:
    """Dominant eigenvalue of a nonnegative matrix by power iteration."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if (M < 0).any():
        raise ValueError("matrix must be nonnegative")
    a = M.shape[0]
    v = np.full(a, 1.0 / a)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        s = w.sum()
        if s == 0.0:
            return 0.0
        w /= s
        if abs(s - lam) <= tol * max(s, 1e-300) and np.abs(w - v).max() <= tol:
            return float(s)
        v = w
        lam = s
    raise NoConvergence(f"power iteration did not converge in {max_iter} iterations")


def renyi_entropy_markov(model: MarkovModel, k: int) -> float:
    """H_k = -log(lambda_k)/(k-1) with lambda_k the Perron root of [P_ij^k]."""
    if k < 2 or int(k) != k:
        raise ValueError("order k must be an integer >= 2")
    _require_mixing(model)
    lam = perron_eigenvalue(model.matrix**k)
    return -math.log(lam) / (k - 1)


def bernoulli_renyi(p, k: int) -> float:
    """Closed form -log(sum_i p_i^k)/(k-1) for an i.i.d. source."""
    if k < 2 or int(k) != k:
        raise ValueError("order k must be an integer >= 2")
    p = np.asarray(p, dtype=float)
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidDistribution("probabilities must be nonnegative and sum to 1")
    return -math.log(float((p**k).sum())) / (k - 1)


@dataclass(eq=False)
class CylinderTable:
    """Counts of all length-ell factors of a sequence (overlapping windows)."""

    length: int
    alphabet_size: int
    keys: np.ndarray  # packed words or raw window rows
    counts: np.ndarray
    total: int
    packed: bool

    def as_dict(self) -> dict:
        """Decode to {word tuple: count}; intended for small tables."""
        out = {}
        if self.packed:
            bits = max(1, (self.alphabet_size - 1).bit_length())
            mask = (1 << bits) - 1
            for key, cnt in zip(self.keys, self.counts):
                word = tuple(
                    int((int(key) >> (bits * (self.length - 1 - j))) & mask)
                    for j in range(self.length)
                )
                out[word] = int(cnt)
        else:
            for word, cnt in zip(self.keys, self.counts):
                out[tuple(int(s) for s in word)] = int(cnt)
        return out


def cylinder_counts(seq: SymbolSequence, ell: int) -> CylinderTable:
    """Sliding-window counts of the length-ell words occurring in ``seq``."""
    if ell < 1:
        raise ValueError("cylinder length must be >= 1")
    n = len(seq)
    if ell > n:
        raise CylinderTooLong(f"cylinder length {ell} exceeds sequence length {n}")
    bits = max(1, (seq.alphabet_size - 1).bit_length())
    total = n - ell + 1
    if ell * bits <= 63:
        shifts = bits * np.arange(ell - 1, -1, -1, dtype=np.int64)
        windows = sliding_window_view(seq.symbols, ell)
        packed = (windows << shifts).sum(axis=1, dtype=np.int64)
        keys, counts = np.unique(packed, return_counts=True)
        return CylinderTable(ell, seq.alphabet_size, keys, counts, total, True)
    counter = Counter(
        seq.symbols[i : i + ell].tobytes() for i in range(total)
    )
    raw = np.array(
        [np.frombuffer(b, dtype=np.int64) for b in counter.keys()], dtype=np.int64
    )
    counts = np.array(list(counter.values()), dtype=np.int64)
    return CylinderTable(ell, seq.alphabet_size, raw, counts, total, False)


def empirical_renyi(table: CylinderTable, k: int) -> float:
    """Plug-in Renyi entropy  -log(sum_C (count/total)^k) / ((k-1) * ell)."""
    if k < 2 or int(k) != k:
        raise ValueError("order k must be an integer >= 2")
    if table.total <= 0:
        raise EmptyTable("cylinder table has zero total count")
    p = table.counts / table.total
    return -math.log(float((p**k).sum())) / ((k - 1) * table.length)
