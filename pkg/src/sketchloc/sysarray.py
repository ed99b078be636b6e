"""Functional weight-stationary systolic array with weight-register faults.

The simulator is dataflow-equivalent rather than register-transfer: column j
outputs ``sum_i w[i][j] * x[i]`` computed exactly, with at most one weight
register replaced by its faulty value. Timing lives separately in
:func:`cycle_model`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .vectors import SketchVector


@dataclass(frozen=True)
class ArrayConfig:
    rows: int
    cols: int
    bit_width: int
    accumulator_bits: int | None = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array needs at least one row and one column")
        if self.bit_width < 2:
            raise ValueError("bit width must be at least 2")
        if self.accumulator_bits is None:
            default = max(32, 2 * self.bit_width + math.ceil(math.log2(self.rows)))
            object.__setattr__(self, "accumulator_bits", default)
        if self.rows * self.magnitude_bound**2 >= 2 ** (self.accumulator_bits - 1):
            raise ValueError(
                f"{self.accumulator_bits}-bit accumulator can overflow for "
                f"L={self.rows}, b={self.bit_width}"
            )

    @property
    def magnitude_bound(self) -> int:
        return 2 ** (self.bit_width - 1) - 1

    @property
    def weight_min(self) -> int:
        return -(2 ** (self.bit_width - 1))

    @property
    def weight_max(self) -> int:
        return 2 ** (self.bit_width - 1) - 1


@dataclass(frozen=True)
class AdditiveBounded:
    error: int


@dataclass(frozen=True)
class StuckBit:
    bit: int
    value: int


FaultModel = Union[AdditiveBounded, StuckBit]


@dataclass(frozen=True)
class FaultSpec:
    """A single faulty weight register at PE(row, col), both 1-based."""

    row: int
    col: int
    model: FaultModel

    def validate(self, config: ArrayConfig) -> None:
        if not 1 <= self.row <= config.rows or not 1 <= self.col <= config.cols:
            raise ValueError(f"fault location ({self.row}, {self.col}) outside array")
        m = self.model
        if isinstance(m, AdditiveBounded):
            if not 1 <= abs(m.error) <= config.magnitude_bound:
                raise ValueError(f"additive error must satisfy 1 <= |e| <= {config.magnitude_bound}")
        elif isinstance(m, StuckBit):
            if not 0 <= m.bit < config.bit_width or m.value not in (0, 1):
                raise ValueError(f"invalid stuck bit ({m.bit}, {m.value}) for b={config.bit_width}")
        else:
            raise TypeError(f"unknown fault model {m!r}")


@dataclass
class RunOutput:
    outputs: list[int]
    cycle_count: int = 0
    masked: bool = False
    out_of_range: bool = False
    effective_error: int = 0
    notes: list[str] = field(default_factory=list)


def to_twos(value: int, bits: int) -> int:
    return value & ((1 << bits) - 1)


def from_twos(pattern: int, bits: int) -> int:
    pattern &= (1 << bits) - 1
    return pattern - (1 << bits) if pattern >> (bits - 1) else pattern


def effective_weight(w: int, model: FaultModel, bit_width: int) -> tuple[int, int]:
    """Return ``(faulty_weight, faulty_weight - w)`` for one register.

    An additive fault may leave the b-bit range; callers flag that rather
    than reject it.
    """
    if isinstance(model, AdditiveBounded):
        return w + model.error, model.error
    if isinstance(model, StuckBit):
        pattern = to_twos(w, bit_width)
        if model.value:
            pattern |= 1 << model.bit
        else:
            pattern &= ~(1 << model.bit)
        faulty = from_twos(pattern, bit_width)
        return faulty, faulty - w
    raise TypeError(f"unknown fault model {model!r}")


class WeightMatrix:
    """L x K signed integer weights, validated against the b-bit range."""

    def __init__(self, values, bit_width: int):
        arr = np.asarray(values, dtype=np.int64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ValueError("weights must be a 2-D L x K array")
        lo, hi = -(2 ** (bit_width - 1)), 2 ** (bit_width - 1) - 1
        if arr.size and (arr.min() < lo or arr.max() > hi):
            raise ValueError(f"weights outside signed {bit_width}-bit range [{lo}, {hi}]")
        self.values = arr
        self.bit_width = bit_width

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def random(cls, rows: int, cols: int, bit_width: int, seed: int) -> "WeightMatrix":
        rng = np.random.default_rng(seed)
        lo, hi = -(2 ** (bit_width - 1)), 2 ** (bit_width - 1)
        return cls(rng.integers(lo, hi, size=(rows, cols), dtype=np.int64), bit_width)

    @classmethod
    def filled(cls, rows: int, cols: int, bit_width: int, value: int) -> "WeightMatrix":
        return cls(np.full((rows, cols), value, dtype=np.int64), bit_width)

    @classmethod
    def from_csv(cls, path: str | Path, bit_width: int) -> "WeightMatrix":
        rows = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                rows.append([int(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValueError(f"{path}: expected a rectangular CSV of integers")
        return cls(rows, bit_width)

    def to_csv(self, path: str | Path) -> None:
        lines = (",".join(str(int(v)) for v in row) for row in self.values)
        Path(path).write_text("\n".join(lines) + "\n")

    def check_config(self, config: ArrayConfig) -> None:
        if self.shape != (config.rows, config.cols):
            raise ValueError(f"weights are {self.shape}, array is {(config.rows, config.cols)}")
        if self.bit_width != config.bit_width:
            raise ValueError("weight bit width differs from array bit width")


def golden_outputs(weights: WeightMatrix, x: SketchVector) -> list[int]:
    """Fault-free column outputs ``W^T x`` (the precomputed checksum)."""
    return _matvec(weights.values, x.entries)


def _matvec(w: np.ndarray, x) -> list[int]:
    bound = len(x) * max(int(np.abs(w).max(initial=0)), 1) * max(max(abs(v) for v in x), 1)
    if bound < 2**62:
        return [int(v) for v in np.asarray(x, dtype=np.int64) @ w]
    xs = np.asarray([int(v) for v in x], dtype=object)
    return [int(v) for v in xs @ w.astype(object)]


def run_mv(
    config: ArrayConfig,
    weights: WeightMatrix,
    fault: FaultSpec | None,
    x: SketchVector | tuple[int, ...],
) -> RunOutput:
    """Stream ``x`` through the array once and read back the column sums.

    ``x`` is normally a :class:`SketchVector`; any integer sequence is
    accepted so arbitrary activations can be streamed too.
    """
    weights.check_config(config)
    entries = x.entries if isinstance(x, SketchVector) else tuple(int(v) for v in x)
    if len(entries) != config.rows:
        raise ValueError(f"sketch has {len(entries)} entries, array has {config.rows} rows")
    w = weights.values
    out = RunOutput(outputs=[], cycle_count=cycle_model(config, 1))
    if fault is not None:
        fault.validate(config)
        i, j = fault.row - 1, fault.col - 1
        faulty, e = effective_weight(int(w[i, j]), fault.model, config.bit_width)
        out.effective_error = e
        out.masked = e == 0
        out.out_of_range = not config.weight_min <= faulty <= config.weight_max
        if out.masked:
            out.notes.append("stuck bit agrees with stored weight; fault masked")
        if out.out_of_range:
            out.notes.append(f"faulty register value {faulty} outside b-bit range")
        w = w.copy()
        w[i, j] = faulty
    out.outputs = _matvec(w, entries)
    return out


def cycle_model(config: ArrayConfig, n_input_vectors: int) -> int:
    """Cycles to load weights, fill the pipeline and stream ``n`` vectors.

    ``rows`` cycles of weight loading, ``rows + cols - 1`` to fill and drain,
    then one cycle per vector after the first. Only the one-cycle increment
    is meant to be compared against measured hardware.
    """
    if n_input_vectors < 1:
        raise ValueError("need at least one input vector")
    return config.rows + (config.rows + config.cols - 1) + (n_input_vectors - 1)


def sketch_overhead(config: ArrayConfig, tile_vectors: int, rounds: int) -> int:
    """Extra cycles from appending ``rounds`` sketch vectors to a loaded tile."""
    return cycle_model(config, tile_vectors + rounds) - cycle_model(config, tile_vectors)
