"""PE-level fault localization in weight-stationary systolic arrays using
coprime sketch vectors."""

from .analysis import (
    ambiguous_multiples,
    expected_failure_rate,
    pfail_exact,
    pfail_report,
    pfail_union_bound,
    row_failure_counts,
    wilson_interval,
)
from .campaign import CampaignConfig, CampaignResult, Outcome, WeightSource, run_campaign, sample_fault, success_criterion
from .localize import (
    Candidate,
    CandidateSet,
    ModelViolation,
    Syndrome,
    column_syndromes,
    decode_pass,
    decode_two_round,
    localize_one_round,
    localize_two_round,
)
from .numtheory import (
    CoprimePool,
    PoolKind,
    build_pool,
    euler_phi,
    farey_count,
    gcd,
    largest_primes_pool,
    odd_primes_pool,
    prime_power_pool,
    primes_up_to,
)
from .sysarray import (
    AdditiveBounded,
    ArrayConfig,
    FaultSpec,
    RunOutput,
    StuckBit,
    WeightMatrix,
    cycle_model,
    effective_weight,
    golden_outputs,
    run_mv,
    sketch_overhead,
)
from .vectors import SketchPair, SketchVector, one_round_vector, two_round_consecutive, two_round_derangement

__version__ = "0.1.0"
