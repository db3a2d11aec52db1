"""Spatial-modulation MIMO detection with the m-M best-first tree search."""

from ._accel import numba_enabled
from .analysis import (
    NumericFailure,
    Scenario,
    complexity_reduction,
    expected_complexity,
    marcum_q,
    max_complexity_reduction,
    node_visit_prob,
    node_visit_prob_series,
)
from .core import (
    CandidateSet,
    ChannelPair,
    Constellation,
    CsirModel,
    InvalidArgument,
    apply_csir_error,
    build_qam,
    enumerate_candidates,
    merge_bits,
    sample_channel,
    sample_noise,
    sm_encode,
    split_bits,
)
from .decode import (
    DecodeOutcome,
    SignalMetrics,
    TableMetrics,
    count_nodes_within_radius,
    ml_decode,
    mm_decode,
    mmw_decode,
)
from .harness import SweepConfig, SweepResult, nom_study, run_sweep, run_trial

__version__ = "0.1.0"
