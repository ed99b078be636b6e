"""Sketch (test) vector construction.

Row numbering is 1-based everywhere in this package: ``entries[0]`` is the
value streamed into row 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .numtheory import CoprimePool, PoolKind, pairwise_coprime


@dataclass(frozen=True)
class SketchVector:
    entries: tuple[int, ...]
    magnitude_bound: int
    pool_kind: PoolKind | None = None
    degraded: bool = False

    def __post_init__(self):
        if not self.entries:
            raise ValueError("sketch vector must have at least one entry")
        bad = [x for x in self.entries if x < 1 or x > self.magnitude_bound]
        if bad:
            raise ValueError(f"sketch entries outside [1, {self.magnitude_bound}]: {bad[:5]}")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    @property
    def rows(self) -> int:
        return len(self.entries)

    def shared_rows(self) -> list[int]:
        """1-based rows whose entry value also appears on another row."""
        counts: dict[int, int] = {}
        for x in self.entries:
            counts[x] = counts.get(x, 0) + 1
        return [k + 1 for k, x in enumerate(self.entries) if counts[x] > 1]

    def to_csv_line(self) -> str:
        return ",".join(str(x) for x in self.entries)


@dataclass(frozen=True)
class SketchPair:
    first: SketchVector
    second: SketchVector
    ratios: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.first) != len(self.second):
            raise ValueError("both rounds must cover the same rows")
        if len(set(self.ratios)) != len(self.ratios):
            raise ValueError("per-row ratios are not pairwise distinct")

    @property
    def rows(self) -> int:
        return len(self.first)

    @classmethod
    def from_vectors(cls, first: SketchVector, second: SketchVector) -> "SketchPair":
        return cls(first, second, tuple(reduced_ratio(b, a) for a, b in zip(first, second)))

    def row_for_ratio(self, ratio: tuple[int, int]) -> int | None:
        for k, r in enumerate(self.ratios):
            if r == ratio:
                return k + 1
        return None


def reduced_ratio(num: int, den: int) -> tuple[int, int]:
    """``num/den`` in lowest terms with positive numerator and denominator."""
    if num <= 0 or den <= 0:
        raise ValueError("ratios are formed from positive entries only")
    g = math.gcd(num, den)
    return num // g, den // g


def one_round_vector(L: int, pool: CoprimePool) -> SketchVector:
    """Give row k the k-th largest pool entry.

    With more rows than pool entries the pool is reused round-robin, so the
    lowest-index rows are the ones that end up sharing values, and the result
    is marked ``degraded``.
    """
    if L < 1:
        raise ValueError("need at least one row")
    if len(pool) == 0:
        raise ValueError("empty coprime pool")
    n = len(pool)
    entries = tuple(pool[k % n] for k in range(L))
    return SketchVector(entries, pool.magnitude_bound, pool.kind, degraded=L > n)


def two_round_derangement(base: SketchVector, shift: int = 1) -> SketchPair:
    L = len(base)
    if L < 2:
        raise ValueError("a derangement needs at least two rows")
    if not 1 <= shift <= L - 1:
        raise ValueError(f"shift must be in [1, {L - 1}]")
    if base.degraded or not pairwise_coprime(base.entries):
        raise ValueError("derangement pairs need pairwise coprime base entries")
    second = tuple(base[(k + shift) % L] for k in range(L))
    return SketchPair.from_vectors(
        base, SketchVector(second, base.magnitude_bound, base.pool_kind)
    )


def two_round_consecutive(L: int, M: int) -> SketchPair:
    """First round ``(1..L)``, second round ``(L, 1, ..., L-1)``."""
    if L < 2:
        raise ValueError("consecutive pairs need at least two rows")
    if L > M:
        raise ValueError(f"consecutive scheme needs L <= M, got L={L}, M={M}")
    first = tuple(range(1, L + 1))
    second = (L,) + tuple(range(1, L))
    return SketchPair.from_vectors(SketchVector(first, M), SketchVector(second, M))


def parse_vector_csv(text: str, M: int) -> list[SketchVector]:
    """One sketch vector per non-blank line of comma-separated integers."""
    vectors = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            entries = tuple(int(tok) for tok in line.split(","))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        vectors.append(SketchVector(entries, M))
    return vectors


def read_vectors(path: str | Path, M: int) -> list[SketchVector]:
    return parse_vector_csv(Path(path).read_text(), M)


def write_vectors(path: str | Path, vectors) -> None:
    Path(path).write_text("".join(v.to_csv_line() + "\n" for v in vectors))
