"""Acceptance gate: one test per criterion, summarised at the end of the run."""

import itertools
from fractions import Fraction

import pytest

from oracles import pfail_brute
from sketchloc.analysis import (
    pfail_exact,
    pfail_union_bound,
    row_failure_counts,
    wilson_interval,
)
from sketchloc.campaign import CampaignConfig, WeightSource, activation_pattern, run_campaign
from sketchloc.localize import Candidate, decode_pass, localize_two_round
from sketchloc.numtheory import (
    PoolKind,
    build_pool,
    largest_primes_pool,
    odd_primes_pool,
    prime_power_pool,
    primes_up_to,
)
from sketchloc.sysarray import (
    AdditiveBounded,
    ArrayConfig,
    FaultSpec,
    StuckBit,
    WeightMatrix,
    cycle_model,
    golden_outputs,
    run_mv,
    sketch_overhead,
)
from sketchloc.vectors import one_round_vector, two_round_consecutive, two_round_derangement

INT8_DIMS = (4, 8, 16, 31)
INT16_DIMS = (4, 8, 16, 32, 64, 128, 256)


def campaign(bits, dims, **kw):
    cfg = CampaignConfig(dims=dims, bit_width=bits, pool_kind=PoolKind.PRIME_POWERS, trials=500, rng_seed=0, **kw)
    return run_campaign(cfg)


def test_criterion_01_int4_worked_example():
    config = ArrayConfig(4, 1, 4)
    w = WeightMatrix([[7], [7], [7], [7]], 4)
    x = one_round_vector(4, largest_primes_pool(7))
    assert x.entries == (7, 5, 3, 2)
    assert golden_outputs(w, x) == [119]
    observed = run_mv(config, w, FaultSpec(2, 1, StuckBit(2, 0)), x)
    assert observed.outputs == [99]
    report = decode_pass(w, x, observed)
    assert report.syndrome.deltas == (-20,)
    assert report.columns[1].candidates == [Candidate(2, -4)]


def test_criterion_02_two_round_worked_example():
    pair = two_round_consecutive(7, 7)
    d1, d2 = -2 * pair.first[2], -2 * pair.second[2]
    assert (d1, d2) == (-6, -4)
    res = localize_two_round(d1, d2, pair, 7)
    assert (res.row, res.error) == (3, -2)


def test_criterion_03_int8_union_bound_table():
    pool = prime_power_pool(127).entries
    assert pfail_union_bound(pool[:8], 127) == Fraction(7, 127)
    assert pfail_union_bound(pool[:16], 127) == Fraction(15, 127)
    assert pfail_union_bound(pool[:31], 127) == Fraction(2100, 3937)


def test_criterion_04_int16_instantiation():
    M = 32767
    primes = primes_up_to(M)
    assert len(primes) == 3512
    assert sum(p > M // 2 for p in primes) == 1612
    pool = largest_primes_pool(M).entries
    b256, b1024 = pfail_union_bound(pool[:256], M), pfail_union_bound(pool[:1024], M)
    assert b256 == Fraction(255, M) and b256 < Fraction(8, 1000)
    assert b1024 == Fraction(1023, M) and b1024 < Fraction(32, 1000)


def test_criterion_05_exact_coincides_for_prime_powers():
    pool = prime_power_pool(127).entries
    for L in range(1, 32):
        assert pfail_exact(pool[:L], 127) == pfail_union_bound(pool[:L], 127), L
    primes = largest_primes_pool(127).entries
    assert pfail_exact(primes, 127) < pfail_union_bound(primes, 127)


def test_criterion_06_exact_matches_brute_force():
    for kind in PoolKind:
        for M in range(2, 128):
            pool = build_pool(kind, M)
            for L in range(1, min(12, len(pool)) + 1):
                entries = pool.entries[:L]
                assert pfail_exact(entries, M) == pfail_brute(entries, M), (kind, M, L)


def test_criterion_07_single_bit_odd_primes_singleton():
    b = 8
    x = one_round_vector(30, odd_primes_pool(2 ** (b - 1) - 1))
    config = ArrayConfig(30, 1, b)
    error_bound = 2 ** (b - 1)  # a sign-bit flip moves the weight by 128
    cases = 0
    for row, beta, value in itertools.product(range(1, 31), range(b), (0, 1)):
        w = WeightMatrix.filled(30, 1, b, activation_pattern(value))
        out = run_mv(config, w, FaultSpec(row, 1, StuckBit(beta, value)), x)
        assert not out.masked
        cs = decode_pass(w, x, out, error_bound).columns[1]
        assert cs.candidates == [Candidate(row, out.effective_error)]
        cases += 1
    assert cases == 30 * 8 * 2


@pytest.mark.parametrize("scheme", ["derangement", "consecutive"])
def test_criterion_08_two_round_exhaustive_int4(scheme):
    if scheme == "consecutive":
        pair = two_round_consecutive(7, 7)
    else:
        pair = two_round_derangement(one_round_vector(4, largest_primes_pool(7)))
    config = ArrayConfig(pair.rows, 1, 4)
    w = WeightMatrix.random(pair.rows, 1, 4, seed=1)
    for row in range(1, pair.rows + 1):
        for e in [v for v in range(-7, 8) if v]:
            fault = FaultSpec(row, 1, AdditiveBounded(e))
            d1 = run_mv(config, w, fault, pair.first).outputs[0] - golden_outputs(w, pair.first)[0]
            d2 = run_mv(config, w, fault, pair.second).outputs[0] - golden_outputs(w, pair.second)[0]
            res = localize_two_round(d1, d2, pair, 7)
            assert (res.row, res.error) == (row, e)


def _within(rec, value):
    lo, hi = wilson_interval(rec.incomplete_count, rec.trials)
    return lo <= float(value) <= hi


def test_criterion_09_empirical_rates_within_wilson_band():
    # the divisibility rule is the event that the exact expression counts
    for bits, dims in ((8, INT8_DIMS), (16, INT16_DIMS)):
        for rec in campaign(bits, dims, candidate_rule="divisibility").records:
            assert rec.model_violations == 0
            assert _within(rec, rec.analytical_exact), (bits, rec.L, rec.empirical_rate)
    # the full decoder (with the magnitude check) tracks its own exact rate
    for bits, dims in ((8, INT8_DIMS), (16, INT16_DIMS)):
        for rec in campaign(bits, dims).records:
            assert rec.model_violations == 0
            assert _within(rec, rec.predicted_rate), (bits, rec.L, rec.empirical_rate)


def test_criterion_10_graceful_degradation():
    M = 127
    x = one_round_vector(32, prime_power_pool(M))
    shared = set(x.shared_rows())
    assert len(shared) == 2
    counts = row_failure_counts(x.entries, M, magnitude_check=True)
    ref = row_failure_counts(prime_power_pool(M).entries, M, magnitude_check=True)
    unique = [i for i in range(32) if i + 1 not in shared]
    assert all(counts[i] == M for i in range(32) if i + 1 in shared)
    # a unique-entry row at L=32 sees the same competitors as at L=31
    assert [counts[i] for i in unique] == [ref[i] for i in unique]

    cfg = CampaignConfig(dims=(32,), bit_width=8, pool_kind=PoolKind.PRIME_POWERS, trials=2000, rng_seed=0)
    rec = run_campaign(cfg).records[0]
    assert rec.model_violations == 0
    assert rec.shared_row_trials > 0
    assert rec.shared_row_incomplete == rec.shared_row_trials
    unique_trials = rec.trials - rec.shared_row_trials
    unique_incomplete = rec.incomplete_count - rec.shared_row_incomplete
    unique_rate = Fraction(sum(counts[i] for i in unique), len(unique) * M)
    lo, hi = wilson_interval(unique_incomplete, unique_trials)
    assert lo <= float(unique_rate) <= hi
    lo, hi = wilson_interval(rec.shared_row_incomplete, rec.trials)
    assert lo <= 2 / 32 <= hi


def test_criterion_11_cycle_increment():
    for L in (8, 16, 32, 64, 128, 256):
        config = ArrayConfig(L, L, 8)
        for n in (1, 4, 64):
            assert cycle_model(config, n + 1) - cycle_model(config, n) == 1
            assert sketch_overhead(config, n, 1) == 1
            assert sketch_overhead(config, n, 2) == 2


def test_criterion_12_weight_independence(tmp_path):
    path = tmp_path / "weights.csv"
    WeightMatrix.random(40, 40, 8, seed=12345).to_csv(path)
    sources = [
        WeightSource("random", seed=0),
        WeightSource("random", seed=777),
        WeightSource("file", path=str(path)),
    ]
    counts = []
    for src in sources:
        cfg = CampaignConfig(dims=INT8_DIMS + (32,), bit_width=8, trials=500, rng_seed=0, weight_source=src)
        counts.append([r.incomplete_count for r in run_campaign(cfg).records])
    assert counts[0] == counts[1] == counts[2]
