"""Seeded Monte Carlo fault-injection campaigns.

Each trial draws a fault location and error, injects it into a fresh copy of
the array, streams the sketch vector(s), decodes, and classifies the outcome.
Trial ``t`` at dimension ``L`` draws from a generator seeded with
``(rng_seed, L, t)`` only, so results do not depend on trial order or on how
trials are split across worker processes.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

from .analysis import (
    expected_failure_rate,
    fraction_json,
    pfail_exact,
    pfail_union_bound,
    wilson_interval,
)
from .localize import CandidateSet, ModelViolation, TwoRoundResult, decode_pass, localize_two_round
from .numtheory import PoolKind, build_pool
from .sysarray import (
    AdditiveBounded,
    ArrayConfig,
    FaultSpec,
    StuckBit,
    WeightMatrix,
    golden_outputs,
    run_mv,
)
from .vectors import SketchPair, SketchVector, one_round_vector, two_round_consecutive, two_round_derangement

ERROR_MODELS = ("bounded_uniform", "single_bit")
SIGN_CONVENTIONS = ("positive_only", "symmetric")
SCHEMES = ("one_round", "two_round_derangement", "two_round_consecutive")
CANDIDATE_RULES = ("full", "divisibility")


class Outcome(str, Enum):
    COMPLETE_CORRECT = "complete_correct"
    INCOMPLETE = "incomplete"
    MODEL_VIOLATION = "model_violation"


@dataclass(frozen=True)
class WeightSource:
    """``kind`` is ``"random"`` (uniform signed b-bit, seeded) or ``"file"``."""

    kind: str = "random"
    seed: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("random", "file"):
            raise ValueError(f"unknown weight source {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ValueError("file weight source needs a path")

    def load(self, rows: int, cols: int, bit_width: int) -> WeightMatrix:
        if self.kind == "random":
            return WeightMatrix.random(rows, cols, bit_width, seed=[self.seed, rows, cols])
        full = WeightMatrix.from_csv(self.path, bit_width)
        if full.shape[0] < rows or full.shape[1] < cols:
            raise ValueError(f"weight file {self.path} is {full.shape}, need at least {(rows, cols)}")
        return WeightMatrix(full.values[:rows, :cols], bit_width)

    def to_dict(self) -> dict:
        if self.kind == "random":
            return {"kind": "random", "seed": self.seed}
        return {"kind": "file", "path": self.path}


@dataclass(frozen=True)
class CampaignConfig:
    dims: tuple[int, ...]
    bit_width: int
    pool_kind: PoolKind = PoolKind.PRIME_POWERS
    trials: int = 500
    rng_seed: int = 0
    error_model: str = "bounded_uniform"
    sign_convention: str = "positive_only"
    weight_source: WeightSource = field(default_factory=WeightSource)
    scheme: str = "one_round"
    cols: int | None = None
    candidate_rule: str = "full"
    confidence: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "pool_kind", PoolKind(self.pool_kind))
        if not self.dims:
            raise ValueError("campaign needs at least one dimension")
        if self.trials < 1:
            raise ValueError("campaign needs at least one trial per dimension")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")
        for name, value, allowed in (
            ("error_model", self.error_model, ERROR_MODELS),
            ("sign_convention", self.sign_convention, SIGN_CONVENTIONS),
            ("scheme", self.scheme, SCHEMES),
            ("candidate_rule", self.candidate_rule, CANDIDATE_RULES),
        ):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")
        M = self.magnitude_bound
        if self.scheme == "two_round_consecutive" and max(self.dims) > M:
            raise ValueError(f"consecutive scheme needs L <= M = {M}")

    @property
    def magnitude_bound(self) -> int:
        return 2 ** (self.bit_width - 1) - 1

    @property
    def error_bound(self) -> int:
        # a stuck sign bit moves the weight by 2**(b-1) = M + 1
        if self.error_model == "single_bit":
            return 2 ** (self.bit_width - 1)
        return self.magnitude_bound

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "bit_width": self.bit_width,
            "pool_kind": self.pool_kind.value,
            "trials": self.trials,
            "rng_seed": self.rng_seed,
            "error_model": self.error_model,
            "sign_convention": self.sign_convention,
            "weight_source": self.weight_source.to_dict(),
            "scheme": self.scheme,
            "cols": self.cols,
            "candidate_rule": self.candidate_rule,
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignConfig":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown campaign config keys: {sorted(unknown)}")
        ws = data.pop("weight_source", None)
        if isinstance(ws, dict):
            data["weight_source"] = WeightSource(**ws)
        elif isinstance(ws, str):
            data["weight_source"] = WeightSource(kind="file", path=ws)
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "CampaignConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def trial_rng(seed: int, L: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, L, trial])


def sample_fault(
    rng: np.random.Generator,
    L: int,
    K: int,
    M: int,
    error_model: str = "bounded_uniform",
    sign_convention: str = "positive_only",
    bit_width: int | None = None,
) -> FaultSpec:
    """Uniform fault location plus an error drawn per the error model.

    ``single_bit`` faults pair a uniform bit with a uniform stuck value; the
    campaign loads the complementary weight pattern so the fault is never
    masked.
    """
    row = int(rng.integers(1, L + 1))
    col = int(rng.integers(1, K + 1))
    if error_model == "bounded_uniform":
        e = int(rng.integers(1, M + 1))
        if sign_convention == "symmetric" and rng.integers(0, 2):
            e = -e
        return FaultSpec(row, col, AdditiveBounded(e))
    if error_model == "single_bit":
        if bit_width is None:
            bit_width = (M + 1).bit_length()
        bit = int(rng.integers(0, bit_width))
        value = int(rng.integers(0, 2))
        return FaultSpec(row, col, StuckBit(bit, value))
    raise ValueError(f"unknown error model {error_model!r}")


def activation_pattern(value: int) -> int:
    """Weight that a stuck-at-``value`` fault disturbs on every bit.

    -1 has every two's-complement bit set, including the sign bit.
    """
    return -1 if value == 0 else 0


def success_criterion(decode_result, true_row: int, true_error: int | None = None) -> Outcome:
    """Classify a decode against the injected fault.

    ``decode_result`` is a :class:`CandidateSet` (one round), a
    :class:`TwoRoundResult`, or the :class:`ModelViolation` raised by
    two-round decoding, which counts as incomplete.
    """
    if isinstance(decode_result, CandidateSet):
        rows = decode_result.rows
        if true_row not in rows:
            return Outcome.MODEL_VIOLATION
        return Outcome.COMPLETE_CORRECT if len(rows) == 1 else Outcome.INCOMPLETE
    if isinstance(decode_result, ModelViolation):
        return Outcome.INCOMPLETE
    if isinstance(decode_result, TwoRoundResult):
        if decode_result.row != true_row:
            return Outcome.MODEL_VIOLATION
        if true_error is not None and decode_result.error != true_error:
            return Outcome.MODEL_VIOLATION
        return Outcome.COMPLETE_CORRECT
    raise TypeError(f"cannot classify {decode_result!r}")


@dataclass
class DimRecord:
    L: int
    trials: int
    incomplete_count: int
    model_violations: int
    empirical_rate: float
    ci_low: float
    ci_high: float
    analytical_bound: Fraction | None
    analytical_exact: Fraction | None
    predicted_rate: Fraction | None
    degraded: bool
    repeated_row_fraction: Fraction
    shared_row_trials: int = 0
    shared_row_incomplete: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("analytical_bound", "analytical_exact", "predicted_rate", "repeated_row_fraction"):
            d[key] = fraction_json(getattr(self, key))
        return d


@dataclass
class CampaignResult:
    config: CampaignConfig
    records: list[DimRecord]

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "records": [r.to_dict() for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["L", "rate", "ci_low", "ci_high", "bound", "exact", "predicted", "degraded"])
        for r in self.records:
            w.writerow([
                r.L,
                repr(r.empirical_rate),
                repr(r.ci_low),
                repr(r.ci_high),
                "" if r.analytical_bound is None else repr(float(r.analytical_bound)),
                "" if r.analytical_exact is None else repr(float(r.analytical_exact)),
                "" if r.predicted_rate is None else repr(float(r.predicted_rate)),
                int(r.degraded),
            ])
        return buf.getvalue()


@dataclass
class _DimSetup:
    L: int
    K: int
    config: ArrayConfig
    vectors: tuple[SketchVector, ...]
    pair: SketchPair | None
    weights: dict[int | None, WeightMatrix]
    golden: dict[int | None, list[list[int]]]
    shared_rows: frozenset[int]


def _sketches(cfg: CampaignConfig, L: int) -> tuple[tuple[SketchVector, ...], SketchPair | None]:
    M = cfg.magnitude_bound
    if cfg.scheme == "two_round_consecutive":
        pair = two_round_consecutive(L, M)
        return (pair.first, pair.second), pair
    base = one_round_vector(L, build_pool(cfg.pool_kind, M))
    if cfg.scheme == "two_round_derangement":
        pair = two_round_derangement(base)
        return (pair.first, pair.second), pair
    return (base,), None


def _setup(cfg: CampaignConfig, L: int) -> _DimSetup:
    K = cfg.cols or L
    config = ArrayConfig(L, K, cfg.bit_width)
    vectors, pair = _sketches(cfg, L)
    if cfg.error_model == "single_bit":
        weights = {v: WeightMatrix.filled(L, K, cfg.bit_width, activation_pattern(v)) for v in (0, 1)}
    else:
        weights = {None: cfg.weight_source.load(L, K, cfg.bit_width)}
    golden = {key: [golden_outputs(w, x) for x in vectors] for key, w in weights.items()}
    return _DimSetup(L, K, config, vectors, pair, weights, golden, frozenset(vectors[0].shared_rows()))


def run_trial(cfg: CampaignConfig, setup: _DimSetup, trial: int) -> tuple[Outcome, int]:
    """One injected fault; returns the outcome and the faulty row."""
    rng = trial_rng(cfg.rng_seed, setup.L, trial)
    fault = sample_fault(
        rng, setup.L, setup.K, cfg.magnitude_bound, cfg.error_model, cfg.sign_convention, cfg.bit_width
    )
    key = fault.model.value if isinstance(fault.model, StuckBit) else None
    weights = setup.weights[key]
    golden = setup.golden[key]
    runs = [run_mv(setup.config, weights, fault, x) for x in setup.vectors]
    e = runs[0].effective_error
    if e == 0:
        raise RuntimeError(f"trial {trial}: fault masked despite activation pattern")

    if setup.pair is None:
        report = decode_pass(
            weights,
            setup.vectors[0],
            runs[0],
            cfg.error_bound,
            expected=golden[0],
            magnitude_check=cfg.candidate_rule == "full",
        )
        if set(report.columns) != {fault.col}:
            return Outcome.MODEL_VIOLATION, fault.row
        return success_criterion(report.columns[fault.col], fault.row), fault.row

    deltas = [
        [o - g for o, g in zip(run.outputs, gold)] for run, gold in zip(runs, golden)
    ]
    faulty = {j + 1 for d in deltas for j, v in enumerate(d) if v}
    if faulty != {fault.col}:
        return Outcome.MODEL_VIOLATION, fault.row
    j = fault.col - 1
    try:
        decoded = localize_two_round(deltas[0][j], deltas[1][j], setup.pair, cfg.error_bound)
    except ModelViolation as exc:
        decoded = exc
    return success_criterion(decoded, fault.row, e), fault.row


def _run_chunk(args) -> list[tuple[Outcome, int]]:
    cfg, L, start, stop = args
    setup = _setup(cfg, L)
    return [run_trial(cfg, setup, t) for t in range(start, stop)]


def _analytical(cfg: CampaignConfig, sketch: SketchVector):
    """(bound, exact, predicted) for the one-round bounded-error setting."""
    if cfg.scheme != "one_round":
        return None, None, Fraction(0)
    if cfg.error_model != "bounded_uniform":
        return None, None, None
    M = cfg.magnitude_bound
    check = cfg.candidate_rule == "full"
    predicted = expected_failure_rate(sketch.entries, M, magnitude_check=check)
    if sketch.degraded or sketch.shared_rows():
        return None, None, predicted
    return pfail_union_bound(sketch.entries, M), pfail_exact(sketch.entries, M), predicted


def run_dim(cfg: CampaignConfig, L: int, workers: int = 1) -> DimRecord:
    setup = _setup(cfg, L)
    if workers > 1 and cfg.trials > 1:
        step = -(-cfg.trials // workers)
        chunks = [(cfg, L, s, min(s + step, cfg.trials)) for s in range(0, cfg.trials, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = [o for part in pool.map(_run_chunk, chunks) for o in part]
    else:
        outcomes = [run_trial(cfg, setup, t) for t in range(cfg.trials)]

    incomplete = sum(o is Outcome.INCOMPLETE for o, _ in outcomes)
    violations = sum(o is Outcome.MODEL_VIOLATION for o, _ in outcomes)
    shared = [(o, r) for o, r in outcomes if r in setup.shared_rows]
    lo, hi = wilson_interval(incomplete, cfg.trials, cfg.confidence)
    bound, exact, predicted = _analytical(cfg, setup.vectors[0])
    return DimRecord(
        L=L,
        trials=cfg.trials,
        incomplete_count=incomplete,
        model_violations=violations,
        empirical_rate=incomplete / cfg.trials,
        ci_low=lo,
        ci_high=hi,
        analytical_bound=bound,
        analytical_exact=exact,
        predicted_rate=predicted,
        degraded=setup.vectors[0].degraded,
        repeated_row_fraction=Fraction(len(setup.shared_rows), L),
        shared_row_trials=len(shared),
        shared_row_incomplete=sum(o is Outcome.INCOMPLETE for o, _ in shared),
    )


def run_campaign(cfg: CampaignConfig, workers: int = 1) -> CampaignResult:
    return CampaignResult(cfg, [run_dim(cfg, L, workers) for L in cfg.dims])
