"""Faulty-row decoding from column output deviations.

One round: row k is a candidate when its sketch entry divides the deviation
and the implied error ``delta / x_k`` fits the error bound. Each check is one
integer division on O(log M)-bit operands, so decoding a faulty column costs
O(L log M) bit operations.

Two rounds: the ratio of the two deviations cancels the error and names the
row whose reduced entry ratio matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .sysarray import RunOutput, WeightMatrix, golden_outputs
from .vectors import SketchPair, SketchVector, reduced_ratio


class ModelViolation(ValueError):
    """The observed deviations cannot come from one weight-register fault."""


@dataclass(frozen=True)
class Syndrome:
    deltas: tuple[int, ...]

    @property
    def faulty_columns(self) -> list[int]:
        return [j + 1 for j, d in enumerate(self.deltas) if d != 0]

    def delta(self, col: int) -> int:
        return self.deltas[col - 1]


@dataclass(frozen=True)
class Candidate:
    row: int
    implied_error: int


@dataclass
class CandidateSet:
    candidates: list[Candidate]
    column: int | None = None
    degraded: bool = False

    @property
    def complete(self) -> bool:
        return len(self.candidates) == 1

    @property
    def rows(self) -> list[int]:
        return [c.row for c in self.candidates]

    def to_dict(self) -> dict:
        return {
            "column": self.column,
            "candidates": [
                {"row": c.row, "implied_error": c.implied_error} for c in self.candidates
            ],
            "complete": self.complete,
            "degraded": self.degraded,
        }


@dataclass(frozen=True)
class TwoRoundResult:
    row: int
    error: int
    column: int | None = None

    def to_dict(self) -> dict:
        return {"column": self.column, "row": self.row, "error": self.error}


def column_syndromes(observed: RunOutput | list[int], expected: list[int]) -> Syndrome:
    obs = observed.outputs if isinstance(observed, RunOutput) else list(observed)
    if len(obs) != len(expected):
        raise ValueError(f"{len(obs)} observed columns vs {len(expected)} expected")
    return Syndrome(tuple(int(o) - int(e) for o, e in zip(obs, expected)))


def localize_one_round(
    delta: int,
    x: SketchVector,
    M: int,
    *,
    magnitude_check: bool = True,
) -> CandidateSet:
    """Candidate rows for a nonzero deviation ``delta``.

    ``M`` bounds the implied error. Pass ``magnitude_check=False`` to keep
    every row whose entry divides ``delta``; that is the rule the analytical
    failure probabilities count.
    """
    if delta == 0:
        raise ValueError("no deviation to localize")
    found = []
    for k, xk in enumerate(x.entries):
        q, r = divmod(delta, xk)
        if r:
            continue
        if magnitude_check and abs(q) > M:
            continue
        found.append(Candidate(k + 1, q))
    return CandidateSet(found, degraded=x.degraded)


def localize_two_round(delta1: int, delta2: int, pair: SketchPair, M: int) -> TwoRoundResult:
    """Recover ``(row, error)`` from the deviations of both rounds."""
    if delta1 == 0 and delta2 == 0:
        raise ValueError("no deviation to localize")
    if delta1 == 0 or delta2 == 0:
        raise ModelViolation("only one round deviated; entries are positive so both must")
    if (delta1 > 0) != (delta2 > 0):
        raise ModelViolation("deviations disagree in sign")
    row = pair.row_for_ratio(reduced_ratio(abs(delta2), abs(delta1)))
    if row is None:
        raise ModelViolation(f"ratio {delta2}/{delta1} matches no row")
    e, r = divmod(delta1, pair.first[row - 1])
    if r or e * pair.second[row - 1] != delta2:
        raise ModelViolation(f"deviations inconsistent with a fault in row {row}")
    if abs(e) > M:
        raise ModelViolation(f"recovered error {e} exceeds bound {M}")
    return TwoRoundResult(row, e)


@dataclass
class DecodeReport:
    syndrome: Syndrome
    columns: dict[int, CandidateSet] = field(default_factory=dict)

    @property
    def fault_free(self) -> bool:
        return not self.columns


def decode_pass(
    weights: WeightMatrix,
    x: SketchVector,
    observed: RunOutput | list[int],
    M: int | None = None,
    *,
    expected: list[int] | None = None,
    magnitude_check: bool = True,
) -> DecodeReport:
    """Golden outputs, syndromes, then a candidate set per faulty column.

    Columns decode independently since at most one register per column is
    assumed faulty. An empty candidate set is returned as-is; callers treat
    it as a model violation.
    """
    if M is None:
        M = 2 ** (weights.bit_width - 1) - 1
    if expected is None:
        expected = golden_outputs(weights, x)
    syn = column_syndromes(observed, expected)
    report = DecodeReport(syn)
    for col in syn.faulty_columns:
        cs = localize_one_round(syn.delta(col), x, M, magnitude_check=magnitude_check)
        cs.column = col
        report.columns[col] = cs
    return report


def decode_two_round(
    weights: WeightMatrix,
    pair: SketchPair,
    observed1: RunOutput | list[int],
    observed2: RunOutput | list[int],
    M: int | None = None,
) -> tuple[Syndrome, Syndrome, dict[int, TwoRoundResult | ModelViolation]]:
    """Per-column ratio decoding; a column's entry is the exception on failure."""
    if M is None:
        M = 2 ** (weights.bit_width - 1) - 1
    s1 = column_syndromes(observed1, golden_outputs(weights, pair.first))
    s2 = column_syndromes(observed2, golden_outputs(weights, pair.second))
    results: dict[int, TwoRoundResult | ModelViolation] = {}
    for col in sorted(set(s1.faulty_columns) | set(s2.faulty_columns)):
        try:
            res = localize_two_round(s1.delta(col), s2.delta(col), pair, M)
            results[col] = TwoRoundResult(res.row, res.error, col)
        except ModelViolation as exc:
            results[col] = exc
    return s1, s2, results
