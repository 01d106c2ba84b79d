"""k-way longest common substrings, encoders, and scrabble scoring.

The matching length of k sequences within their first n symbols is

    M_n = max{ m : some word of length m starts at positions
               i_1..i_k <= n - m in every sequence },

computed exactly either by window-set enumeration (the oracle) or by
binary search over m with double-modulus polynomial fingerprints.  Every
fingerprint match is verified character by character before it counts,
so hash collisions cost time, never correctness.

The scrabble score V_n replaces word length by a per-letter weight sum;
its limit constant comes from the dominant eigenvalue of an expanded
matrix in which each letter i is unrolled into a deterministic chain of
v(i) states whose exit edges carry the transition probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import (
    AlphabetMismatch,
    EncodedTooShort,
    GcdNotOne,
    KTooSmall,
    NTooLarge,
)
from .symbolic import MarkovModel, SymbolSequence, _require_mixing, perron_eigenvalue

_P1 = 2_147_483_647  # 2^31 - 1
_B1 = 1_000_003
_P2 = 2_147_483_629
_B2 = 5_000_011


# ---------------------------------------------------------------------------
# encoders


@dataclass(frozen=True)
class IdentityEncoder:
    """Encoder that leaves sequences unchanged."""


@dataclass(frozen=True)
class LetterRepetition:
    """Replace each letter a by a^v(a): the scrabble encoder."""

    weights: tuple

    def __post_init__(self):
        if len(self.weights) == 0:
            raise ValueError("need at least one weight")
        if any(int(w) != w or w < 1 for w in self.weights):
            raise ValueError("weights must be positive integers")


@dataclass(frozen=True)
class BlockSubstitution:
    """Replace each letter by a fixed nonempty word over the output alphabet."""

    words: tuple  # one tuple of output symbols per input letter
    alphabet_size: int  # output alphabet

    def __post_init__(self):
        if len(self.words) == 0:
            raise ValueError("need at least one substitution word")
        for w in self.words:
            if len(w) == 0:
                raise ValueError("substitution words must be nonempty")
            if any(s < 0 or s >= self.alphabet_size for s in w):
                raise ValueError("substitution symbols out of output alphabet")


EncoderSpec = Union[IdentityEncoder, LetterRepetition, BlockSubstitution]


def expansion_bound(enc: EncoderSpec) -> int:
    """Max output symbols per input letter (so h(n) <= bound * n)."""
    if isinstance(enc, IdentityEncoder):
        return 1
    if isinstance(enc, LetterRepetition):
        return int(max(enc.weights))
    if isinstance(enc, BlockSubstitution):
        return max(len(w) for w in enc.words)
    raise TypeError(f"unknown encoder {enc!r}")


def apply_encoder(enc: EncoderSpec, seq: SymbolSequence) -> SymbolSequence:
    """Encode a sequence letter by letter."""
    if isinstance(enc, IdentityEncoder):
        return seq
    if isinstance(enc, LetterRepetition):
        if len(enc.weights) != seq.alphabet_size:
            raise AlphabetMismatch(
                f"{len(enc.weights)} weights for alphabet of size {seq.alphabet_size}"
            )
        w = np.asarray(enc.weights, dtype=np.int64)
        return SymbolSequence(np.repeat(seq.symbols, w[seq.symbols]), seq.alphabet_size)
    if isinstance(enc, BlockSubstitution):
        if len(enc.words) != seq.alphabet_size:
            raise AlphabetMismatch(
                f"{len(enc.words)} substitution words for alphabet of size {seq.alphabet_size}"
            )
        words = [np.asarray(w, dtype=np.int64) for w in enc.words]
        if len(seq) == 0:
            return SymbolSequence(np.empty(0, dtype=np.int64), enc.alphabet_size)
        return SymbolSequence(
            np.concatenate([words[s] for s in seq.symbols]), enc.alphabet_size
        )
    raise TypeError(f"unknown encoder {enc!r}")


# ---------------------------------------------------------------------------
# exact LCS oracle


def _check_instance(seqs: Sequence[SymbolSequence], n: int):
    if len(seqs) < 2:
        raise KTooSmall(f"need k >= 2 sequences, got {len(seqs)}")
    if n < 1:
        raise ValueError("window must be >= 1")
    short = min(len(s) for s in seqs)
    if n > short:
        raise NTooLarge(f"window {n} exceeds the shortest sequence length {short}")


def lcs_k_bruteforce(seqs: Sequence[SymbolSequence], n: int) -> int:
    """Oracle: enumerate all window sets per length, longest first."""
    _check_instance(seqs, n)
    arrs = [np.ascontiguousarray(s.symbols[:n]) for s in seqs]
    for m in range(n, 0, -1):
        common = None
        for arr in arrs:
            words = {arr[i : i + m].tobytes() for i in range(n - m + 1)}
            common = words if common is None else common & words
            if not common:
                break
        if common:
            return m
    return 0


# ---------------------------------------------------------------------------
# fingerprint machinery


class _SeqHasher:
    """Double-modulus polynomial fingerprints of power-of-two windows.

    Levels are built lazily: matching lengths grow like log n, so only
    the first few doubling levels are ever touched.
    """

    def __init__(self, symbols: np.ndarray):
        arr = np.ascontiguousarray(symbols, dtype=np.int64)
        self.n = arr.size
        self.levels1 = [arr % _P1]
        self.levels2 = [arr % _P2]
        self.pw1 = [_B1 % _P1]
        self.pw2 = [_B2 % _P2]

    def _ensure_level(self, j: int):
        while len(self.levels1) <= j:
            i = len(self.levels1) - 1
            span = 1 << i
            keep = self.n - (span << 1) + 1
            l1, l2 = self.levels1[i], self.levels2[i]
            self.levels1.append((l1[:keep] * self.pw1[i] + l1[span : span + keep]) % _P1)
            self.levels2.append((l2[:keep] * self.pw2[i] + l2[span : span + keep]) % _P2)
            self.pw1.append((self.pw1[i] * self.pw1[i]) % _P1)
            self.pw2.append((self.pw2[i] * self.pw2[i]) % _P2)

    def window_keys(self, m: int, count: int) -> np.ndarray:
        """Combined fingerprints of s[i:i+m] for i = 0..count-1."""
        if m < 1 or m > self.n or count < 1 or count > self.n - m + 1:
            raise ValueError("window length/count out of range")
        self._ensure_level(m.bit_length() - 1)
        h1 = np.zeros(count, dtype=np.int64)
        h2 = np.zeros(count, dtype=np.int64)
        consumed = 0
        for j in range(m.bit_length() - 1, -1, -1):
            if not (m >> j) & 1:
                continue
            h1 = (h1 * self.pw1[j] + self.levels1[j][consumed : consumed + count]) % _P1
            h2 = (h2 * self.pw2[j] + self.levels2[j][consumed : consumed + count]) % _P2
            consumed += 1 << j
        return h1 * _P2 + h2


def _candidate_keys(key_arrays) -> np.ndarray:
    common = None
    for keys in key_arrays:
        u = np.unique(keys)
        common = u if common is None else np.intersect1d(common, u, assume_unique=True)
        if common.size == 0:
            break
    return common


def _feasible_quick(arrs, hashers, m: int, n: int):
    """True/False via first-witness verification; None if collisions muddy it."""
    count = n - m + 1
    key_arrays = [h.window_keys(m, count) for h in hashers]
    common = _candidate_keys(key_arrays)
    if common.size == 0:
        return False
    saw_mismatch = False
    for key in common:
        p0 = int(np.flatnonzero(key_arrays[0] == key)[0])
        witness = arrs[0][p0 : p0 + m].tobytes()
        ok = True
        for l in range(1, len(arrs)):
            hit = False
            for p in np.flatnonzero(key_arrays[l] == key):
                if arrs[l][p : p + m].tobytes() == witness:
                    hit = True
                    break
            if not hit:
                ok = False
                saw_mismatch = True
                break
        if ok:
            return True
    return None if saw_mismatch else False


def _common_words_exact(arrs, hashers, m: int, n: int):
    """Every verified common word of length m with starts <= n - m.

    Returns a list of (word_bytes, per-sequence ascending position arrays),
    exact even under fingerprint collisions: words are grouped per key and
    compared by content.
    """
    count = n - m + 1
    key_arrays = [h.window_keys(m, count) for h in hashers]
    common = _candidate_keys(key_arrays)
    if common.size == 0:
        return []
    orders = [np.argsort(keys, kind="stable") for keys in key_arrays]
    sorted_keys = [keys[o] for keys, o in zip(key_arrays, orders)]
    out = []
    for key in common:
        word_maps = []
        for l, arr in enumerate(arrs):
            lo = np.searchsorted(sorted_keys[l], key, side="left")
            hi = np.searchsorted(sorted_keys[l], key, side="right")
            wm = {}
            for p in sorted(int(q) for q in orders[l][lo:hi]):
                wm.setdefault(arr[p : p + m].tobytes(), []).append(p)
            word_maps.append(wm)
        for wb, pos0 in word_maps[0].items():
            if all(wb in wm for wm in word_maps[1:]):
                out.append((wb, [pos0] + [wm[wb] for wm in word_maps[1:]]))
    return out


def _feasible(arrs, hashers, m: int, n: int) -> bool:
    quick = _feasible_quick(arrs, hashers, m, n)
    if quick is None:  # double-modulus collision: settle it exactly
        return len(_common_words_exact(arrs, hashers, m, n)) > 0
    return quick


def _gallop(arrs, hashers, n: int, lo: int) -> int:
    """Largest feasible m, galloping upward from a known-feasible lo."""
    if lo == 0 and not _feasible(arrs, hashers, 1, n):
        return 0
    if lo == 0:
        lo = 1
    step = 1
    hi = lo + step
    while hi <= n and _feasible(arrs, hashers, hi, n):
        lo = hi
        step *= 2
        hi = lo + step
    hi = min(hi, n + 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _feasible(arrs, hashers, mid, n):
            lo = mid
        else:
            hi = mid
    return lo


def lcs_k_fast(seqs: Sequence[SymbolSequence], n: int, *, with_witness: bool = False):
    """Exactly :func:`lcs_k_bruteforce`, via fingerprint binary search.

    With ``with_witness=True`` returns ``(length, word, positions)`` where
    ``word`` is the lexicographically smallest optimal word (None when the
    length is 0) and ``positions`` gives one start per sequence.
    """
    _check_instance(seqs, n)
    arrs = [np.ascontiguousarray(s.symbols[:n]) for s in seqs]
    hashers = [_SeqHasher(a) for a in arrs]
    best = _gallop(arrs, hashers, n, 0)
    if not with_witness:
        return best
    if best == 0:
        return 0, None, None
    words = _common_words_exact(arrs, hashers, best, n)
    decoded = sorted(
        (tuple(int(v) for v in np.frombuffer(wb, dtype=np.int64)), pos)
        for wb, pos in words
    )
    word, pos = decoded[0]
    return best, word, [p[0] for p in pos]


def lcs_ladder(seqs: Sequence[SymbolSequence], ns: Sequence[int]) -> list:
    """M_n along an increasing ladder of windows, reusing fingerprints.

    Exploits monotonicity of M_n in n: each rung gallops upward from the
    previous rung's value.
    """
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("window ladder must be strictly increasing")
    _check_instance(seqs, max(ns))
    arrs = [np.ascontiguousarray(s.symbols) for s in seqs]
    hashers = [_SeqHasher(a) for a in arrs]
    out = []
    prev = 0
    for n in ns:
        prev = _gallop(arrs, hashers, n, prev)
        out.append(prev)
    return out


# ---------------------------------------------------------------------------
# encoded matching and scrabble


def lcs_encoded(enc: EncoderSpec, seqs: Sequence[SymbolSequence], n: int) -> int:
    """M_n over the encoded sequences: encode, truncate to n, match.

    Window convention: start positions range over 0..n-m in the encoded
    sequences, i.e. the matching statistic of the length-n encoded
    prefixes.
    """
    encoded = [apply_encoder(enc, s) for s in seqs]
    for e in encoded:
        if len(e) < n:
            raise EncodedTooShort(
                f"encoded sequence of length {len(e)} shorter than window {n}"
            )
    prefixes = [SymbolSequence(e.symbols[:n], e.alphabet_size) for e in encoded]
    return lcs_k_fast(prefixes, n)


def scrabble_Vn(
    seqs: Sequence[SymbolSequence],
    weights,
    n: int,
    *,
    window: str = "original",
) -> int:
    """Highest weight sum over words common to all k sequences.

    ``window="original"`` constrains each occurrence's start to
    ``i <= n - m`` in the raw sequences (m the word length).
    ``window="encoded"`` instead requires the letter-repetition image of
    the occurrence to fit in the encoded window: ``E(i) + V(z) <= n``
    with E the encoded-position prefix sum.  The encoded convention is
    the one under which V_n coincides with the matching length of the
    encoded sequences, up to partial-block boundary effects.
    """
    _check_instance(seqs, n)
    if window not in ("original", "encoded"):
        raise ValueError("window must be 'original' or 'encoded'")
    alphabet = {s.alphabet_size for s in seqs}
    if len(alphabet) != 1 or len(weights) != alphabet.pop():
        raise AlphabetMismatch("need one weight per letter of the shared alphabet")
    w = np.asarray(weights, dtype=np.int64)
    if (w < 1).any():
        raise ValueError("weights must be positive integers")

    arrs = [np.ascontiguousarray(s.symbols[:n]) for s in seqs]
    hashers = [_SeqHasher(a) for a in arrs]
    longest = _gallop(arrs, hashers, n, 0)
    if longest == 0:
        return 0
    if window == "encoded":
        prefix_e = [np.concatenate([[0], np.cumsum(w[a])]) for a in arrs]
    vmax = int(w.max())
    best = 0
    for m in range(longest, 0, -1):
        if vmax * m <= best:
            break
        for wb, pos_lists in _common_words_exact(arrs, hashers, m, n):
            word = np.frombuffer(wb, dtype=np.int64)
            value = int(w[word].sum())
            if value <= best:
                continue
            if window == "encoded":
                if any(
                    prefix_e[l][pos[0]] > n - value for l, pos in enumerate(pos_lists)
                ):
                    continue
            best = value
    return best


@dataclass(eq=False)
class ScrabbleSpec:
    """Markov source plus coprime positive letter weights."""

    model: MarkovModel
    weights: tuple

    def __post_init__(self):
        w = tuple(int(x) for x in self.weights)
        if len(w) != self.model.alphabet_size:
            raise AlphabetMismatch("need one weight per letter")
        if any(x < 1 for x in w):
            raise ValueError("weights must be positive integers")
        if math.gcd(*w) != 1:
            raise GcdNotOne(f"weights {w} have gcd {math.gcd(*w)}")
        self.weights = w


def scrabble_matrix(spec: ScrabbleSpec) -> np.ndarray:
    """Expanded transition matrix: letter i becomes a chain of v(i) states.

    Within-block edges carry probability 1; the block's last state exits
    to the first state of block j with probability P_ij.  The matrix is
    stochastic of size sum_i v(i).
    """
    P = spec.model.matrix
    v = spec.weights
    offsets = np.concatenate([[0], np.cumsum(v)])
    size = int(offsets[-1])
    Q = np.zeros((size, size))
    for i in range(len(v)):
        start = offsets[i]
        for step_ in range(v[i] - 1):
            Q[start + step_, start + step_ + 1] = 1.0
        last = start + v[i] - 1
        for j in range(len(v)):
            Q[last, offsets[j]] = P[i, j]
    return Q


def scrabble_limit_constant(spec: ScrabbleSpec, k: int) -> float:
    """k / (-log q) with q the Perron root of the entrywise k-th power of
    the expanded matrix."""
    if k < 2 or int(k) != k:
        raise ValueError("order k must be an integer >= 2")
    _require_mixing(spec.model)
    q = perron_eigenvalue(scrabble_matrix(spec) ** k)
    if not 0.0 < q < 1.0:
        raise ValueError(f"degenerate expanded eigenvalue {q!r}")
    return k / (-math.log(q))


def lcs_limit_constant(model: MarkovModel, k: int) -> float:
    """k / (-log lambda_k) with lambda_k the Perron root of [P_ij^k]."""
    if k < 2 or int(k) != k:
        raise ValueError("order k must be an integer >= 2")
    _require_mixing(model)
    lam = perron_eigenvalue(model.matrix**k)
    if not 0.0 < lam < 1.0:
        raise ValueError(f"degenerate eigenvalue {lam!r}")
    return k / (-math.log(lam))
