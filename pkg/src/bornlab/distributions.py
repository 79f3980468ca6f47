"""Bitstring distributions: construction, marginals, parities, datasets.

Conventions used everywhere in the library:

* A bitstring of length ``n`` is written with bit 0 as the *leftmost*
  character, e.g. ``"01"`` has bit 0 = 0 and bit 1 = 1.
* The integer code of a bitstring uses bit 0 as the most-significant bit,
  so ``"01"`` -> 1 and ``"10"`` -> 2.  Statevector amplitudes are indexed
  by this code.
* Distributions store only strictly positive entries; absent bitstrings
  have probability zero.

Values are immutable after construction and safe to share across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError
from .rng import generator

_SUM_TOL = 1e-9


# ---------------------------------------------------------------------------
# bit helpers

def bits_to_strings(bits: np.ndarray) -> list[str]:
    """Rows of a (m, n) 0/1 array as bitstring strings."""
    return ["".join("1" if b else "0" for b in row) for row in np.asarray(bits)]


def string_to_bits(s: str) -> np.ndarray:
    if not s or any(c not in "01" for c in s):
        raise ValueError(f"not a bitstring: {s!r}")
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


def bits_to_codes(bits: np.ndarray) -> np.ndarray:
    """Integer codes of bit rows (bit 0 = most significant); requires n <= 62."""
    n = bits.shape[-1]
    if n > 62:
        raise ValueError("integer codes only supported for n <= 62")
    weights = (1 << np.arange(n - 1, -1, -1)).astype(np.int64)
    return bits.astype(np.int64) @ weights


def codes_to_bits(codes: np.ndarray, n: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[..., None] >> shifts) & 1).astype(np.uint8)


def _lexsort_rows(bits: np.ndarray) -> np.ndarray:
    """Indices sorting rows lexicographically (bit 0 major)."""
    return np.lexsort(tuple(bits[:, i] for i in range(bits.shape[1] - 1, -1, -1)))


def normalize_subset(indices: Iterable[int], n: int) -> tuple[int, ...]:
    """Validate and sort a subset of bit positions."""
    subset = tuple(sorted(int(i) for i in indices))
    if len(set(subset)) != len(subset):
        raise ValueError(f"duplicate indices in subset {subset}")
    if subset and (subset[0] < 0 or subset[-1] >= n):
        raise ValueError(f"subset {subset} out of range for n={n}")
    return subset


@dataclass(frozen=True)
class SubsetMask:
    """Sorted, duplicate-free set of bit positions inside ``range(n)``."""

    indices: tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "indices", normalize_subset(self.indices, self.n))


# ---------------------------------------------------------------------------
# Distribution

class Distribution:
    """Normalized mapping from fixed-length bitstrings to probabilities.

    The support is stored as a lexicographically sorted (S, n) bit matrix with
    a parallel probability vector.  Entries are strictly positive and sum to 1
    within 1e-9.
    """

    __slots__ = ("n_bits", "bits", "probs", "_lookup")

    def __init__(self, n_bits: int, bits: np.ndarray, probs: np.ndarray):
        bits = np.ascontiguousarray(np.asarray(bits, dtype=np.uint8).reshape(-1, n_bits))
        probs = np.asarray(probs, dtype=np.float64).reshape(-1)
        if bits.shape[0] != probs.shape[0]:
            raise ValueError("bits/probs length mismatch")
        if np.any(probs < 0):
            raise ValueError("negative probability")
        keep = probs > 0.0
        bits, probs = bits[keep], probs[keep]
        order = _lexsort_rows(bits) if len(probs) else np.arange(0)
        bits, probs = bits[order], probs[order]
        if len(probs) > 1:
            dup = np.all(bits[1:] == bits[:-1], axis=1)
            if np.any(dup):
                raise ValueError("duplicate bitstrings in distribution")
        total = float(probs.sum())
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        bits.setflags(write=False)
        probs.setflags(write=False)
        self.n_bits = int(n_bits)
        self.bits = bits
        self.probs = probs
        self._lookup: dict[bytes, float] | None = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_pairs(cls, n_bits: int, pairs: Iterable[tuple[str, float]]) -> "Distribution":
        rows, probs = [], []
        for s, p in pairs:
            if len(s) != n_bits:
                raise ValueError(f"bitstring {s!r} has wrong length for n={n_bits}")
            rows.append(string_to_bits(s))
            probs.append(p)
        if not rows:
            raise ValueError("empty distribution")
        return cls(n_bits, np.array(rows, dtype=np.uint8), np.array(probs))

    @classmethod
    def from_dense(cls, probs: np.ndarray, n_bits: int) -> "Distribution":
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (1 << n_bits,):
            raise ValueError("dense vector has wrong length")
        codes = np.nonzero(probs > 0.0)[0]
        return cls(n_bits, codes_to_bits(codes, n_bits), probs[codes])

    @classmethod
    def point_mass(cls, bitstring: str) -> "Distribution":
        return cls.from_pairs(len(bitstring), [(bitstring, 1.0)])

    @classmethod
    def uniform_over(cls, n_bits: int, strings: Sequence[str]) -> "Distribution":
        return cls.from_pairs(n_bits, [(s, 1.0 / len(strings)) for s in strings])

    # -- access --------------------------------------------------------------

    @property
    def support_size(self) -> int:
        return len(self.probs)

    def prob(self, bitstring: str) -> float:
        if len(bitstring) != self.n_bits:
            raise ValueError("bitstring length mismatch")
        if self._lookup is None:
            self._lookup = {
                row.tobytes(): float(p) for row, p in zip(self.bits, self.probs)
            }
        return self._lookup.get(string_to_bits(bitstring).tobytes(), 0.0)

    def items(self) -> Iterator[tuple[str, float]]:
        for s, p in zip(bits_to_strings(self.bits), self.probs):
            yield s, float(p)

    def as_dict(self) -> dict[str, float]:
        return dict(self.items())

    def to_dense(self) -> np.ndarray:
        """Full 2^n probability vector indexed by integer code (n <= 20)."""
        if self.n_bits > 20:
            raise ValueError("dense representation limited to n <= 20")
        dense = np.zeros(1 << self.n_bits)
        dense[bits_to_codes(self.bits)] = self.probs
        return dense

    def probs_of(self, bits: np.ndarray) -> np.ndarray:
        """Probabilities of the given (m, n) bit rows (zero when unsupported)."""
        if self._lookup is None:
            self._lookup = {
                row.tobytes(): float(p) for row, p in zip(self.bits, self.probs)
            }
        rows = np.ascontiguousarray(np.asarray(bits, dtype=np.uint8))
        return np.array([self._lookup.get(r.tobytes(), 0.0) for r in rows])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Distribution)
            and self.n_bits == other.n_bits
            and self.bits.shape == other.bits.shape
            and bool(np.all(self.bits == other.bits))
            and bool(np.all(self.probs == other.probs))
        )

    def __repr__(self) -> str:
        return f"Distribution(n_bits={self.n_bits}, support={self.support_size})"

    # -- serialization -------------------------------------------------------

    def write_csv(self, path: str | Path) -> None:
        """Headerless CSV, one ``bitstring,probability`` line per entry."""
        with open(path, "w", encoding="ascii") as fh:
            for s, p in self.items():
                fh.write(f"{s},{p!r}\n")

    @classmethod
    def read_csv(cls, path: str | Path) -> "Distribution":
        pairs: list[tuple[str, float]] = []
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("bitstring"):
                    continue
                s, p = line.split(",")
                pairs.append((s, float(p)))
        if not pairs:
            raise ConfigError(f"empty distribution file: {path}")
        return cls.from_pairs(len(pairs[0][0]), pairs)


class ProductDistribution:
    """Lazy Born distribution of a tensor-product state (probability on demand).

    Only per-qubit one-probabilities are stored, so it scales to thousands of
    bits; used when enumerating 2^n entries is not an option.
    """

    __slots__ = ("n_bits", "p_one")

    def __init__(self, p_one: np.ndarray):
        p_one = np.asarray(p_one, dtype=np.float64)
        if np.any(p_one < -1e-12) or np.any(p_one > 1 + 1e-12):
            raise ValueError("per-bit probabilities out of range")
        self.p_one = np.clip(p_one, 0.0, 1.0)
        self.p_one.setflags(write=False)
        self.n_bits = len(self.p_one)

    def prob(self, bitstring: str) -> float:
        bits = string_to_bits(bitstring)
        if len(bits) != self.n_bits:
            raise ValueError("bitstring length mismatch")
        per_bit = np.where(bits == 1, self.p_one, 1.0 - self.p_one)
        return float(np.prod(per_bit))

    def probs_of(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8)
        per_bit = np.where(bits == 1, self.p_one, 1.0 - self.p_one)
        return np.prod(per_bit, axis=-1)


@dataclass(frozen=True)
class SampleSet:
    """Multiset of bitstrings drawn in a single sampling call."""

    n_bits: int
    bits: np.ndarray  # (shots, n_bits) uint8
    shots: int
    seed: int

    def __post_init__(self) -> None:
        bits = np.ascontiguousarray(np.asarray(self.bits, dtype=np.uint8))
        if bits.shape != (self.shots, self.n_bits):
            raise ValueError("sample matrix shape does not match (shots, n_bits)")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def strings(self) -> list[str]:
        return bits_to_strings(self.bits)


def empirical_distribution(samples: SampleSet) -> Distribution:
    """Plug-in estimate: each bitstring gets probability count/shots."""
    if samples.shots < 1:
        raise ValueError("need at least one sample")
    rows, counts = np.unique(samples.bits, axis=0, return_counts=True)
    return Distribution(samples.n_bits, rows, counts / samples.shots)


# ---------------------------------------------------------------------------
# marginals, parities, distances

def marginal(dist: Distribution, subset: Iterable[int]) -> Distribution:
    """Marginal distribution on a nonempty subset of bit positions.

    Bit j of the result corresponds to the j-th smallest index in ``subset``,
    so marginals compose: ``marginal(marginal(d, A), B)`` equals
    ``marginal(d, [A[j] for j in B])``.
    """
    sub = normalize_subset(subset, dist.n_bits)
    if not sub:
        raise ValueError("marginal over the empty subset is the total probability 1")
    rows = dist.bits[:, sub]
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    probs = np.zeros(len(uniq))
    np.add.at(probs, inverse, dist.probs)
    return Distribution(len(sub), uniq, probs)


def average_parity(dist: Distribution, subset: Iterable[int]) -> float:
    """Expected value of (-1)^(sum of bits in subset); 1 for the empty subset."""
    sub = normalize_subset(subset, dist.n_bits)
    if not sub:
        return 1.0
    parity = dist.bits[:, sub].sum(axis=1) & 1
    signs = 1.0 - 2.0 * parity
    return float(np.dot(signs, dist.probs))


def walsh_hadamard_transform(v: np.ndarray) -> np.ndarray:
    """Unnormalized WHT: out[m] = sum_x v[x] (-1)^popcount(x & m), in O(n 2^n)."""
    out = np.array(v, dtype=np.float64)
    size = len(out)
    if size & (size - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < size:
        view = out.reshape(-1, 2, h)
        a = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] = a - view[:, 1, :]
        h *= 2
    return out


def all_parities(dist: Distribution) -> np.ndarray:
    """Average parities z_A for every subset A, indexed by subset mask.

    Bit i of the mask (bit 0 most significant) marks membership of position i,
    matching the integer-code convention.  Requires n <= 20.
    """
    return walsh_hadamard_transform(dist.to_dense())


def total_variation(p: Distribution, q: Distribution) -> float:
    """Sum of |p(x) - q(x)| over all bitstrings (ranges over [0, 2])."""
    if p.n_bits != q.n_bits:
        raise ValueError("distributions have different lengths")
    all_bits = np.concatenate([p.bits, q.bits])
    rows, inverse = np.unique(all_bits, axis=0, return_inverse=True)
    pv = np.zeros(len(rows))
    qv = np.zeros(len(rows))
    np.add.at(pv, inverse[: p.support_size], p.probs)
    np.add.at(qv, inverse[p.support_size:], q.probs)
    return float(np.abs(pv - qv).sum())


# ---------------------------------------------------------------------------
# benchmark datasets

DATASET_KINDS = ("GHZ", "RANDOM_K", "CARDINALITY", "PARITY3", "POINT_ZERO")

# Uniform distribution whose third bit is the XOR of the first two; its 1- and
# 2-bit marginals all match the uniform distribution on 3 bits.
_PARITY3_STRINGS = ("000", "011", "101", "110")


def make_dataset(kind: str, n: int, k: int | None = None, seed: int = 0) -> Distribution:
    """Benchmark target distributions.

    GHZ: uniform on the all-0 and all-1 strings.  RANDOM_K: uniform on k
    distinct seeded-random strings.  CARDINALITY: uniform on all strings of
    Hamming weight floor(n/2).  PARITY3: the 3-bit even-parity counterexample.
    POINT_ZERO: point mass on the all-0 string.
    """
    kind = kind.upper()
    if kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}; choose from {DATASET_KINDS}")
    if n < 1:
        raise ValueError("n must be positive")
    if kind == "GHZ":
        return Distribution.uniform_over(n, ["0" * n, "1" * n])
    if kind == "POINT_ZERO":
        return Distribution.point_mass("0" * n)
    if kind == "PARITY3":
        if n != 3:
            raise ValueError("PARITY3 is defined for n = 3 only")
        return Distribution.uniform_over(3, list(_PARITY3_STRINGS))
    if kind == "CARDINALITY":
        weight = n // 2
        if math.comb(n, weight) > (1 << 22):
            raise ValueError("CARDINALITY support too large to enumerate")
        from itertools import combinations

        rows = np.zeros((math.comb(n, weight), n), dtype=np.uint8)
        for i, ones in enumerate(combinations(range(n), weight)):
            rows[i, list(ones)] = 1
        return Distribution(n, rows, np.full(len(rows), 1.0 / len(rows)))
    # RANDOM_K: rejection-sample k distinct strings
    if k is None or k < 1:
        raise ValueError("RANDOM_K requires k >= 1")
    if n <= 62 and k > (1 << n):
        raise ValueError(f"cannot pick {k} distinct strings out of 2^{n}")
    rng = generator(seed)
    chosen: dict[bytes, np.ndarray] = {}
    while len(chosen) < k:
        row = (rng.random(n) < 0.5).astype(np.uint8)
        chosen.setdefault(row.tobytes(), row)
    rows = np.array(list(chosen.values()), dtype=np.uint8)
    return Distribution(n, rows, np.full(k, 1.0 / k))


def ingest_image_dataset(path: str | Path, threshold_factor: float = 0.1) -> Distribution:
    """Binarize a plain-text image dataset into a bitstring distribution.

    The file holds one image per blank-line-separated block, each block being
    rows of whitespace-separated numbers.  A pixel maps to 1 when its value
    exceeds ``threshold_factor`` times the mean pixel value over the whole
    dataset; bits are ordered row-major.
    """
    text = Path(path).read_text(encoding="ascii")
    images: list[np.ndarray] = []
    for block in text.split("\n\n"):
        lines = [ln for ln in block.splitlines() if ln.strip()]
        if not lines:
            continue
        rows = [np.array([float(v) for v in ln.split()]) for ln in lines]
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError(f"ragged grid in {path}")
        images.append(np.vstack(rows))
    if not images:
        raise ValueError(f"no images found in {path}")
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValueError(f"images of differing shapes in {path}")
    stack = np.stack(images)
    threshold = threshold_factor * float(stack.mean())
    bits = (stack > threshold).astype(np.uint8).reshape(len(images), -1)
    rows, counts = np.unique(bits, axis=0, return_counts=True)
    return Distribution(bits.shape[1], rows, counts / len(images))
