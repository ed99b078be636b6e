"""Exact failure-probability evaluators for one-round localization.

All bound and exact values are :class:`fractions.Fraction`, so coincidences
such as bound == exact are tested without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist

from .numtheory import pairwise_coprime

DEFAULT_MAX_VISITS = 10**7


class EnumerationLimitExceeded(RuntimeError):
    pass


def _require_distinct(entries, M):
    if not entries:
        raise ValueError("need at least one entry")
    if any(x < 1 or x > M for x in entries):
        raise ValueError(f"entries must lie in [1, {M}]")
    if len(set(entries)) != len(entries):
        raise ValueError(
            "pool has repeated entries (degraded); use row_failure_counts instead"
        )


def pfail_union_bound(entries, M: int) -> Fraction:
    """Union bound ``(L-1)/(L*M) * sum(M // x_k)`` on the one-round miss rate."""
    entries = list(entries)
    _require_distinct(entries, M)
    L = len(entries)
    return Fraction((L - 1) * sum(M // x for x in entries), L * M)


def _union_count(others, M, q, magnitude_check, budget):
    """``|{e in 1..M : some x in others survives}|`` by pruned inclusion-exclusion.

    ``others`` must be sorted ascending and pairwise coprime, so the lcm of a
    subset is its product. Once a product passes the cutoff, every later
    (larger) sibling and every superset contributes zero and is skipped.
    With the magnitude check, row k also needs ``e / x_k <= q``; across a
    subset that caps e at ``q * min(subset)``, and the minimum is the first
    entry picked because entries ascend.
    """
    n = len(others)
    total = 0
    # explicit stack: (next index, product, sign, cutoff)
    for first in range(n):
        x0 = others[first]
        cutoff = min(M, q * x0) if magnitude_check else M
        if x0 > cutoff:
            if magnitude_check:
                continue
            break
        stack = [(first + 1, x0, 1)]
        total += cutoff // x0
        budget[0] -= 1
        while stack:
            start, prod, sign = stack.pop()
            for idx in range(start, n):
                p = prod * others[idx]
                if p > cutoff:
                    break
                budget[0] -= 1
                total += -sign * (cutoff // p)
                stack.append((idx + 1, p, -sign))
            if budget[0] < 0:
                raise EnumerationLimitExceeded("inclusion-exclusion visit cap exceeded")
    return total


def row_failure_counts(
    entries,
    M: int,
    *,
    magnitude_check: bool = False,
    max_visits: int = DEFAULT_MAX_VISITS,
) -> list[int]:
    """For each faulty row, how many ``e in 1..M`` leave another candidate.

    Rows whose entry value is repeated elsewhere fail for every ``e``. Other
    rows count the union over the distinct values on the remaining rows,
    which must be coprime to each other and to the faulty row's entry.
    """
    entries = list(entries)
    if not entries or any(x < 1 or x > M for x in entries):
        raise ValueError(f"entries must be nonempty and lie in [1, {M}]")
    distinct = sorted(set(entries))
    if not pairwise_coprime(distinct):
        raise ValueError("distinct entries must be pairwise coprime")
    seen: dict[int, int] = {}
    for x in entries:
        seen[x] = seen.get(x, 0) + 1
    budget = [max_visits]
    counts = []
    cache: dict[int, int] = {}
    for x in entries:
        if seen[x] > 1:
            counts.append(M)
            continue
        if x not in cache:
            others = [y for y in distinct if y != x]
            cache[x] = _union_count(others, M, M // x, magnitude_check, budget)
        counts.append(cache[x])
    return counts


def pfail_exact(
    entries,
    M: int,
    *,
    magnitude_check: bool = False,
    max_visits: int = DEFAULT_MAX_VISITS,
) -> Fraction:
    """Exact one-round miss probability, averaged over the faulty row.

    With ``magnitude_check=False`` (the default) a wrong row counts as a
    survivor whenever its entry divides the error, matching the union bound's
    event. With ``True`` the implied-error check of the decoder is applied
    as well, giving the exact rate of :func:`localize_one_round` as run.
    """
    entries = list(entries)
    _require_distinct(entries, M)
    if not pairwise_coprime(entries):
        raise ValueError("exact evaluation assumes pairwise coprime entries")
    counts = row_failure_counts(
        entries, M, magnitude_check=magnitude_check, max_visits=max_visits
    )
    return Fraction(sum(counts), len(entries) * M)


def expected_failure_rate(entries, M: int, *, magnitude_check: bool = False) -> Fraction:
    """Like :func:`pfail_exact` but also defined for degraded (repeated) entries."""
    counts = row_failure_counts(entries, M, magnitude_check=magnitude_check)
    return Fraction(sum(counts), len(counts) * M)


@dataclass(frozen=True)
class AmbiguousMultiples:
    per_entry: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.per_entry)

    @property
    def total_excluding_self(self) -> int:
        return sum(c - 1 for c in self.per_entry)


def ambiguous_multiples(entries, M: int) -> AmbiguousMultiples:
    """Multiples of each entry within ``1..M`` (the terms of the union bound)."""
    entries = list(entries)
    if any(x < 1 or x > M for x in entries):
        raise ValueError(f"entries must lie in [1, {M}]")
    return AmbiguousMultiples(tuple(M // x for x in entries))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("Wilson interval needs at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    n = trials
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return low, high


def fraction_json(value: Fraction | None) -> dict | None:
    if value is None:
        return None
    return {"rational": f"{value.numerator}/{value.denominator}", "decimal": float(value)}


@dataclass
class PfailReport:
    L: int
    pool_kind: str
    magnitude_bound: int
    bound: Fraction | None
    exact: Fraction | None = None
    empirical: tuple[float, int, float, float] | None = None
    degraded: bool = False
    repeated_row_fraction: Fraction = Fraction(0)
    note: str = ""

    def __post_init__(self):
        if self.bound is not None and self.exact is not None and self.exact > self.bound:
            raise ValueError("exact value exceeds union bound")

    @property
    def bound_capped(self) -> Fraction | None:
        return None if self.bound is None else min(self.bound, Fraction(1))

    def to_dict(self) -> dict:
        out = {
            "L": self.L,
            "pool_kind": self.pool_kind,
            "M": self.magnitude_bound,
            "bound": fraction_json(self.bound),
            "bound_capped": fraction_json(self.bound_capped),
            "exact": fraction_json(self.exact),
            "degraded": self.degraded,
            "repeated_row_fraction": fraction_json(self.repeated_row_fraction),
        }
        if self.empirical is not None:
            rate, trials, lo, hi = self.empirical
            out["empirical"] = {"rate": rate, "trials": trials, "ci_low": lo, "ci_high": hi}
        if self.note:
            out["note"] = self.note
        return out


def pfail_report(sketch, *, with_exact: bool = True) -> PfailReport:
    """Analytical summary for one sketch vector."""
    L = len(sketch)
    M = sketch.magnitude_bound
    kind = sketch.pool_kind.value if sketch.pool_kind is not None else "custom"
    shared = sketch.shared_rows()
    if shared:
        return PfailReport(
            L,
            kind,
            M,
            bound=None,
            degraded=True,
            repeated_row_fraction=Fraction(len(shared), L),
            note=(
                f"{len(shared)} of {L} rows share an entry and always fail one-round "
                "localization; bound and exact value do not apply"
            ),
        )
    bound = pfail_union_bound(sketch.entries, M)
    exact = pfail_exact(sketch.entries, M) if with_exact else None
    return PfailReport(L, kind, M, bound=bound, exact=exact)
