import json
from collections import Counter
from fractions import Fraction

import pytest
from scipy.stats import chisquare

from sketchloc.campaign import (
    CampaignConfig,
    Outcome,
    WeightSource,
    run_campaign,
    sample_fault,
    success_criterion,
    trial_rng,
)
from sketchloc.localize import Candidate, CandidateSet, ModelViolation, TwoRoundResult
from sketchloc.sysarray import StuckBit, WeightMatrix


def test_success_criterion_one_round():
    assert success_criterion(CandidateSet([Candidate(2, -4)]), 2) is Outcome.COMPLETE_CORRECT
    both = CandidateSet([Candidate(2, -4), Candidate(4, -1)])
    assert success_criterion(both, 2) is Outcome.INCOMPLETE
    assert success_criterion(CandidateSet([Candidate(3, 5)]), 2) is Outcome.MODEL_VIOLATION
    assert success_criterion(CandidateSet([]), 2) is Outcome.MODEL_VIOLATION


def test_success_criterion_two_round():
    assert success_criterion(TwoRoundResult(3, -2), 3, -2) is Outcome.COMPLETE_CORRECT
    assert success_criterion(TwoRoundResult(3, -2), 3, 2) is Outcome.MODEL_VIOLATION
    assert success_criterion(TwoRoundResult(4, -2), 3) is Outcome.MODEL_VIOLATION
    assert success_criterion(ModelViolation("x"), 3) is Outcome.INCOMPLETE


def test_sample_fault_reproducible():
    a = [sample_fault(trial_rng(42, 8, t), 8, 8, 127) for t in range(50)]
    b = [sample_fault(trial_rng(42, 8, t), 8, 8, 127) for t in range(50)]
    assert a == b
    c = [sample_fault(trial_rng(43, 8, t), 8, 8, 127) for t in range(50)]
    assert a != c


def test_sample_fault_ranges():
    for t in range(500):
        f = sample_fault(trial_rng(1, 5, t), 5, 3, 7, sign_convention="symmetric")
        assert 1 <= f.row <= 5 and 1 <= f.col <= 3
        assert 1 <= abs(f.model.error) <= 7
        g = sample_fault(trial_rng(1, 5, t), 5, 3, 7, "single_bit", bit_width=4)
        assert isinstance(g.model, StuckBit) and 0 <= g.model.bit <= 3


def test_positive_errors_uniform():
    draws = [sample_fault(trial_rng(7, 4, t), 4, 4, 7).model.error for t in range(7000)]
    counts = Counter(draws)
    assert set(counts) == set(range(1, 8))
    assert chisquare([counts[v] for v in range(1, 8)]).pvalue > 0.001


def test_rows_uniform():
    rows = [sample_fault(trial_rng(3, 31, t), 31, 31, 127).row for t in range(6200)]
    counts = Counter(rows)
    assert chisquare([counts[r] for r in range(1, 32)]).pvalue > 0.001


def small_config(**kw):
    base = dict(dims=(4, 8, 16), bit_width=8, trials=200, rng_seed=11)
    base.update(kw)
    return CampaignConfig(**base)


def test_determinism():
    a = run_campaign(small_config())
    b = run_campaign(small_config())
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()


def test_worker_split_identical():
    cfg = small_config(dims=(8, 31))
    assert run_campaign(cfg, workers=3).to_json() == run_campaign(cfg).to_json()


def test_weight_independence(tmp_path):
    path = tmp_path / "w.csv"
    WeightMatrix.random(40, 40, 8, seed=99).to_csv(path)
    cfg = small_config(dims=(4, 16, 31, 32))
    files = small_config(dims=(4, 16, 31, 32), weight_source=WeightSource("file", path=str(path)))
    seeded = small_config(dims=(4, 16, 31, 32), weight_source=WeightSource("random", seed=5))
    counts = [[r.incomplete_count for r in run_campaign(c).records] for c in (cfg, files, seeded)]
    assert counts[0] == counts[1] == counts[2]


def test_sign_convention_irrelevant():
    pos = run_campaign(small_config(dims=(8, 31)))
    sym = run_campaign(small_config(dims=(8, 31), sign_convention="symmetric"))
    assert [r.incomplete_count for r in pos.records] == [r.incomplete_count for r in sym.records]


def test_no_model_violations_any_scheme():
    for scheme, dims in (
        ("one_round", (4, 31, 32, 40)),
        ("two_round_derangement", (2, 8, 31)),
        ("two_round_consecutive", (2, 32, 127)),
    ):
        for model in ("bounded_uniform", "single_bit"):
            res = run_campaign(small_config(dims=dims, scheme=scheme, error_model=model, trials=150))
            assert all(r.model_violations == 0 for r in res.records), (scheme, model)
            if scheme != "one_round":
                assert all(r.incomplete_count == 0 for r in res.records), (scheme, model)


def test_single_bit_odd_primes_always_complete():
    res = run_campaign(small_config(dims=(30,), pool_kind="odd_primes", error_model="single_bit", trials=400))
    assert res.records[0].incomplete_count == 0


def test_degraded_record():
    rec = run_campaign(small_config(dims=(32,), trials=400)).records[0]
    assert rec.degraded
    assert rec.repeated_row_fraction == Fraction(2, 32)
    assert rec.analytical_bound is None and rec.analytical_exact is None
    assert rec.shared_row_trials > 0
    assert rec.shared_row_incomplete == rec.shared_row_trials


def test_analytical_columns():
    rec = run_campaign(small_config(dims=(31,), trials=10)).records[0]
    assert rec.analytical_bound == rec.analytical_exact == Fraction(2100, 3937)
    assert rec.predicted_rate < rec.analytical_exact
    div = run_campaign(small_config(dims=(31,), trials=10, candidate_rule="divisibility")).records[0]
    assert div.predicted_rate == div.analytical_exact


def test_config_json_roundtrip(tmp_path):
    cfg = small_config(weight_source=WeightSource("random", seed=3), scheme="two_round_consecutive")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert CampaignConfig.from_json(path) == cfg


def test_config_validation():
    with pytest.raises(ValueError):
        CampaignConfig(dims=(), bit_width=8)
    with pytest.raises(ValueError):
        CampaignConfig(dims=(4,), bit_width=8, trials=0)
    with pytest.raises(ValueError):
        CampaignConfig(dims=(128,), bit_width=8, scheme="two_round_consecutive")
    with pytest.raises(ValueError):
        CampaignConfig(dims=(4,), bit_width=8, error_model="gaussian")
    with pytest.raises(ValueError):
        CampaignConfig.from_dict({"dims": [4], "bit_width": 8, "bogus": 1})


def test_weight_file_too_small(tmp_path):
    path = tmp_path / "w.csv"
    WeightMatrix.random(4, 4, 8, seed=0).to_csv(path)
    cfg = small_config(dims=(8,), weight_source=WeightSource("file", path=str(path)))
    with pytest.raises(ValueError):
        run_campaign(cfg)


def test_csv_output():
    text = run_campaign(small_config(dims=(4, 32), trials=20)).to_csv()
    lines = text.splitlines()
    assert lines[0] == "L,rate,ci_low,ci_high,bound,exact,predicted,degraded"
    assert lines[1].startswith("4,") and lines[2].startswith("32,")
    assert lines[2].split(",")[4:6] == ["", ""]
