"""Command-line entry point.

Exit codes: 0 clean or localized, 1 usage/file error, 2 incomplete
localization, 3 model violation.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import analysis
from .campaign import CampaignConfig, WeightSource, run_campaign
from .localize import ModelViolation, decode_pass, decode_two_round
from .numtheory import PoolKind, build_pool
from .sysarray import (
    AdditiveBounded,
    ArrayConfig,
    FaultSpec,
    StuckBit,
    WeightMatrix,
    cycle_model,
    run_mv,
    sketch_overhead,
)
from .vectors import (
    SketchPair,
    one_round_vector,
    read_vectors,
    two_round_consecutive,
    two_round_derangement,
)

EXIT_OK, EXIT_USAGE, EXIT_INCOMPLETE, EXIT_VIOLATION = 0, 1, 2, 3

POOLS = click.Choice([k.value for k in PoolKind])
FORMATS = click.Choice(["json", "csv"])
SCHEMES = click.Choice(["one_round", "two_round_derangement", "two_round_consecutive"])


def bound_for(bits: int) -> int:
    if bits < 2:
        raise click.BadParameter("bit width must be at least 2", param_hint="--bits")
    return 2 ** (bits - 1) - 1


def parse_dims(text: str) -> list[int]:
    """``"8,16,31"`` or ``"4:32:4"`` (start:stop:step, stop inclusive)."""
    dims = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            bits = [int(p) for p in part.split(":")]
            start, stop = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1
            dims.extend(range(start, stop + 1, step))
        elif part:
            dims.append(int(part))
    if not dims or min(dims) < 1:
        raise click.BadParameter(f"bad dimension list {text!r}", param_hint="--rows")
    return dims


def parse_fault(text: str) -> FaultSpec:
    """``ROW,COL,add:E`` or ``ROW,COL,stuck:BIT:VALUE`` (1-based row/col)."""
    try:
        row, col, model = text.split(",", 2)
        kind, *args = model.split(":")
        if kind == "add":
            (e,) = args
            return FaultSpec(int(row), int(col), AdditiveBounded(int(e)))
        if kind == "stuck":
            bit, value = args
            return FaultSpec(int(row), int(col), StuckBit(int(bit), int(value)))
    except ValueError:
        pass
    raise click.BadParameter(
        f"{text!r}: expected ROW,COL,add:E or ROW,COL,stuck:BIT:VALUE", param_hint="--fault"
    )


def emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_weights(path, bits, rows, cols, seed) -> WeightMatrix:
    if path:
        return WeightMatrix.from_csv(path, bits)
    if rows is None:
        raise click.UsageError("give --weights or --rows (with optional --cols/--seed)")
    return WeightMatrix.random(rows, cols or rows, bits, seed=seed)


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_USAGE)


@click.group(cls=_Group)
def main():
    """Coprime sketch vectors for PE-level fault localization in systolic arrays."""


@main.command()
@click.option("--bits", type=int, required=True, help="Operand bit width b (M = 2^(b-1) - 1).")
@click.option("--pool", type=POOLS, default="largest_primes", show_default=True)
@click.option("--format", "fmt", type=FORMATS, default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write to file instead of stdout.")
def primes(bits, pool, fmt, out):
    """List a coprime pool (largest first)."""
    M = bound_for(bits)
    p = build_pool(pool, M)
    if fmt == "csv":
        emit(",".join(map(str, p.entries)) + "\n", out)
    else:
        emit(dump_json({"M": M, "kind": p.kind.value, "count": len(p), "entries": list(p.entries)}), out)


@main.command()
@click.option("--bits", type=int, required=True)
@click.option("--rows", type=int, required=True, help="Array rows L.")
@click.option("--pool", type=POOLS, default="largest_primes", show_default=True)
@click.option("--scheme", type=SCHEMES, default="one_round", show_default=True)
@click.option("--shift", type=int, default=1, show_default=True, help="Rotation for the derangement scheme.")
@click.option("--out", type=click.Path(dir_okay=False))
def vector(bits, rows, pool, scheme, shift, out):
    """Print the sketch vector(s), one CSV line per round."""
    M = bound_for(bits)
    if scheme == "two_round_consecutive":
        pair = two_round_consecutive(rows, M)
        vectors = [pair.first, pair.second]
    else:
        base = one_round_vector(rows, build_pool(pool, M))
        if base.degraded:
            click.echo(
                f"warning: degraded sketch, {rows} rows exceed the {pool} pool size; "
                f"rows {base.shared_rows()} share entries",
                err=True,
            )
        if scheme == "two_round_derangement":
            pair = two_round_derangement(base, shift)
            vectors = [pair.first, pair.second]
        else:
            vectors = [base]
    emit("".join(v.to_csv_line() + "\n" for v in vectors), out)


def _simulate(bits, weights, vectors, fault):
    L, K = weights.shape
    config = ArrayConfig(L, K, bits)
    return [run_mv(config, weights, fault, x) for x in vectors]


@main.command()
@click.option("--bits", type=int, required=True)
@click.option("--vector", "vector_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--weights", type=click.Path(exists=True, dir_okay=False), help="L x K CSV of signed ints.")
@click.option("--rows", type=int, help="Random weights: rows (if no --weights).")
@click.option("--cols", type=int, help="Random weights: columns (default = rows).")
@click.option("--seed", type=int, default=0, show_default=True, help="Random weight seed.")
@click.option("--fault", help="ROW,COL,add:E or ROW,COL,stuck:BIT:VALUE")
@click.option("--format", "fmt", type=FORMATS, default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def simulate(bits, vector_file, weights, rows, cols, seed, fault, fmt, out):
    """Run each sketch vector through the (optionally faulty) array."""
    M = bound_for(bits)
    w = load_weights(weights, bits, rows, cols, seed)
    vectors = read_vectors(vector_file, M)
    runs = _simulate(bits, w, vectors, parse_fault(fault) if fault else None)
    if fmt == "csv":
        emit("".join(",".join(map(str, r.outputs)) + "\n" for r in runs), out)
    else:
        emit(dump_json([
            {"outputs": r.outputs, "masked": r.masked, "effective_error": r.effective_error,
             "out_of_range": r.out_of_range, "cycle_count": r.cycle_count}
            for r in runs
        ]), out)


def _read_observed(path) -> list[list[int]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    return [[int(tok) for tok in ln.split(",")] for ln in lines]


@main.command()
@click.option("--bits", type=int, required=True)
@click.option("--vector", "vector_file", type=click.Path(exists=True, dir_okay=False), required=True,
              help="One line (one round) or two lines (ratio decoding).")
@click.option("--weights", type=click.Path(exists=True, dir_okay=False))
@click.option("--rows", type=int)
@click.option("--cols", type=int)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--observed", type=click.Path(exists=True, dir_okay=False),
              help="Observed outputs, one CSV line per round.")
@click.option("--fault", help="Simulate this fault instead of reading --observed.")
@click.option("--error-bound", type=int, help="Largest |error| accepted (default M).")
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def localize(ctx, bits, vector_file, weights, rows, cols, seed, observed, fault, error_bound, out):
    """Decode faulty rows from observed outputs; JSON report, exit code = outcome."""
    M = bound_for(bits)
    bound = error_bound if error_bound is not None else M
    w = load_weights(weights, bits, rows, cols, seed)
    vectors = read_vectors(vector_file, M)
    if len(vectors) not in (1, 2):
        raise click.UsageError("vector file must hold one or two rounds")
    if (observed is None) == (fault is None):
        raise click.UsageError("give exactly one of --observed or --fault")
    if observed:
        outputs = _read_observed(observed)
    else:
        outputs = [r.outputs for r in _simulate(bits, w, vectors, parse_fault(fault))]
    if len(outputs) != len(vectors):
        raise click.UsageError(f"{len(vectors)} rounds of vectors but {len(outputs)} observed lines")

    columns = []
    if len(vectors) == 1:
        report = decode_pass(w, vectors[0], outputs[0], bound)
        for cs in report.columns.values():
            columns.append(cs.to_dict())
        statuses = [
            "model_violation" if not c["candidates"] else "localized" if c["complete"] else "incomplete"
            for c in columns
        ]
    else:
        pair = SketchPair.from_vectors(*vectors)
        _, _, results = decode_two_round(w, pair, outputs[0], outputs[1], bound)
        statuses = []
        for col, res in results.items():
            if isinstance(res, ModelViolation):
                columns.append({"column": col, "complete": False, "reason": str(res)})
                statuses.append("model_violation")
            else:
                columns.append({**res.to_dict(), "complete": True})
                statuses.append("localized")

    if "model_violation" in statuses:
        status, code = "model_violation", EXIT_VIOLATION
    elif "incomplete" in statuses:
        status, code = "incomplete", EXIT_INCOMPLETE
    elif statuses:
        status, code = "localized", EXIT_OK
    else:
        status, code = "no_fault", EXIT_OK
    emit(dump_json({"status": status, "rounds": len(vectors), "columns": columns}), out)
    ctx.exit(code)


def _table(bits, pool, rows, with_exact):
    M = bound_for(bits)
    p = build_pool(pool, M)
    return [analysis.pfail_report(one_round_vector(L, p), with_exact=with_exact) for L in parse_dims(rows)]


def _table_csv(reports, with_exact) -> str:
    cols = ["L", "bound", "bound_decimal", "bound_capped"] + (["exact", "exact_decimal"] if with_exact else [])
    lines = [",".join(cols + ["note"])]
    for r in reports:
        if r.bound is None:
            cells = [str(r.L)] + [""] * (len(cols) - 1)
        else:
            cells = [str(r.L), str(r.bound), repr(float(r.bound)), repr(float(r.bound_capped))]
            if with_exact:
                cells += [str(r.exact), repr(float(r.exact))]
        lines.append(",".join(cells + [r.note]))
    return "\n".join(lines) + "\n"


def _emit_table(reports, with_exact, fmt, out):
    if fmt == "csv":
        emit(_table_csv(reports, with_exact), out)
    else:
        emit(dump_json([r.to_dict() for r in reports]), out)


_table_options = [
    click.option("--bits", type=int, required=True),
    click.option("--rows", required=True, help='Dimensions, e.g. "8,16,31" or "4:31".'),
    click.option("--pool", type=POOLS, default="largest_primes", show_default=True),
    click.option("--format", "fmt", type=FORMATS, default="json", show_default=True),
    click.option("--out", type=click.Path(dir_okay=False)),
]


def _with_table_options(f):
    for opt in reversed(_table_options):
        f = opt(f)
    return f


@main.command()
@_with_table_options
def bound(bits, rows, pool, fmt, out):
    """Union-bound table of the one-round miss probability."""
    _emit_table(_table(bits, pool, rows, False), False, fmt, out)


@main.command()
@_with_table_options
def exact(bits, rows, pool, fmt, out):
    """Exact (inclusion-exclusion) miss probability alongside the bound."""
    _emit_table(_table(bits, pool, rows, True), True, fmt, out)


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="JSON campaign config; flags below are ignored when given.")
@click.option("--bits", type=int)
@click.option("--rows", help='Dimensions, e.g. "4,8,16,31".')
@click.option("--cols", type=int, help="Columns K (default = L).")
@click.option("--pool", type=POOLS, default="prime_powers", show_default=True)
@click.option("--trials", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--error-model", type=click.Choice(["bounded_uniform", "single_bit"]), default="bounded_uniform")
@click.option("--sign", type=click.Choice(["positive_only", "symmetric"]), default="positive_only")
@click.option("--scheme", type=SCHEMES, default="one_round", show_default=True)
@click.option("--rule", type=click.Choice(["full", "divisibility"]), default="full", show_default=True,
              help="Candidate rule: divisibility plus magnitude check, or divisibility only.")
@click.option("--weights", type=click.Path(exists=True, dir_okay=False), help="Weight CSV (top-left L x K block used).")
@click.option("--weight-seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--format", "fmt", type=FORMATS, default="json", show_default=True)
@click.option("--out", help="Output prefix; writes PREFIX.json and PREFIX.csv.")
def campaign(config_file, bits, rows, cols, pool, trials, seed, error_model, sign, scheme, rule,
             weights, weight_seed, workers, fmt, out):
    """Monte Carlo fault-injection campaign over array dimensions."""
    if config_file:
        cfg = CampaignConfig.from_json(config_file)
    else:
        if bits is None or rows is None:
            raise click.UsageError("give --config or both --bits and --rows")
        source = WeightSource("file", path=weights) if weights else WeightSource("random", seed=weight_seed)
        cfg = CampaignConfig(
            dims=tuple(parse_dims(rows)), bit_width=bits, pool_kind=pool, trials=trials,
            rng_seed=seed, error_model=error_model, sign_convention=sign,
            weight_source=source, scheme=scheme, cols=cols, candidate_rule=rule,
        )
    result = run_campaign(cfg, workers=workers)
    if out:
        Path(f"{out}.json").write_text(result.to_json())
        Path(f"{out}.csv").write_text(result.to_csv())
        click.echo(f"wrote {out}.json and {out}.csv", err=True)
    else:
        emit(result.to_json() if fmt == "json" else result.to_csv(), None)
    if any(r.model_violations for r in result.records):
        sys.exit(EXIT_VIOLATION)


@main.command()
@click.option("--rows", type=int, required=True)
@click.option("--cols", type=int, help="Default = rows.")
@click.option("--bits", type=int, default=8, show_default=True)
@click.option("--vectors", type=int, default=1, show_default=True, help="Vectors in the tile.")
@click.option("--rounds", type=int, default=1, show_default=True, help="Sketch vectors appended.")
def cycles(rows, cols, bits, vectors, rounds):
    """Pipeline cycle model and the sketch-vector overhead."""
    config = ArrayConfig(rows, cols or rows, bits)
    click.echo(dump_json({
        "rows": rows,
        "cols": config.cols,
        "tile_cycles": cycle_model(config, vectors),
        "with_sketch_cycles": cycle_model(config, vectors + rounds),
        "sketch_overhead": sketch_overhead(config, vectors, rounds),
    }), nl=False)


if __name__ == "__main__":
    main()
