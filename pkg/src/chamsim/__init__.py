"""Behavioral simulator of randomized cache organizations — skewed caches
with keyed index derivation plus a reinserting victim cache — together with
an eviction-set attacker toolkit, leakage metrics, a trace-driven miss-rate
simulator, and reproducible experiment runners.
"""

from .attacker import (
    EvictionSet,
    FlushReport,
    PPPParams,
    ProfilingStats,
    VictimHandle,
    eviction_success_rate,
    ppp_profile,
    random_eviction_set,
    truly_conflicting_members,
    vc_flush_attack,
)
from .cache import (
    CEASER,
    CEASER_PLUS_VC,
    CEASER_S,
    CHAMELEON,
    CHAMELEON_NO_REINSERT,
    FULLY_ASSOCIATIVE_RANDOM,
    SET_ASSOCIATIVE,
    AttackerView,
    CacheConfig,
    list_models,
    make_cache,
)
from .errors import (
    ChamsimError,
    EstimatorPrecisionError,
    InternalConsistencyError,
    InvalidConfigError,
    TraceParseError,
)
from .experiments import (
    EXPERIMENTS,
    ExperimentResult,
    ExperimentSpec,
    derive_seed,
    run_experiment,
)
from .idf import IdfKey, derive_indices, derive_indices_batch, generate_keys
from .metrics import (
    EntropyReport,
    ProbabilityModel,
    full_collision_prob,
    mutual_information_bits,
    partial_collision_prob,
    proxy_prob,
    relative_eviction_entropy,
    second_order_eviction_prob,
    welch_t,
)
from .tracesim import (
    MissRateReport,
    Trace,
    load_trace,
    run_trace,
    save_trace,
    synth_trace,
)

__version__ = "1.0.0"
