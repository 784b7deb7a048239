"""Greedy sparsity-aware estimation over simulated ad-hoc networks.

Batch DiHaT and online GreeDi-LMS with their cooperation variants, plus
scenario generation, consensus-weight construction, and a Monte-Carlo
experiment harness with a CLI front end (`greedinet`).
"""

__version__ = "0.1.0"

from .linalg import (
    hard_threshold,
    matmat,
    matvec,
    restricted_least_squares,
    rip_constant_bruteforce,
    topk_support,
    transpose_matvec,
)
from .network import (
    ConsensusReport,
    RoundBuffer,
    Topology,
    build_metropolis,
    build_uniform,
    synchronous_combine,
    verify_consensus_conditions,
)
from .scenario import (
    RNG_ALGORITHM,
    BatchNodeData,
    GroundTruth,
    Schedule,
    StreamSample,
    derive_rng,
    gen_batch_data,
    gen_ground_truth,
    gen_online_stream,
)
from .dihat import (
    DihatConfig,
    DihatNodeState,
    DihatResult,
    DihatState,
    dihat_iteration,
    dihat_proxy,
    run_dihat,
)
from .greedi import (
    GreediConfig,
    GreediNodeState,
    GreediResult,
    run_greedi,
    run_greedi_centralized,
    run_greedi_reference,
)
from .harness import (
    ComparisonResult,
    ConfigError,
    ExperimentConfig,
    ExperimentTrace,
    TheoryReport,
    compare_variants,
    emit_outputs,
    parse_config_text,
    run_experiment,
    verify_theory,
)
from .presets import PRESETS, get_preset, preset_names

__all__ = [
    "hard_threshold",
    "restricted_least_squares",
    "rip_constant_bruteforce",
    "topk_support",
    "matvec",
    "matmat",
    "transpose_matvec",
    "Topology",
    "ConsensusReport",
    "RoundBuffer",
    "build_metropolis",
    "build_uniform",
    "verify_consensus_conditions",
    "synchronous_combine",
    "RNG_ALGORITHM",
    "GroundTruth",
    "Schedule",
    "StreamSample",
    "BatchNodeData",
    "derive_rng",
    "gen_ground_truth",
    "gen_batch_data",
    "gen_online_stream",
    "DihatConfig",
    "DihatState",
    "DihatNodeState",
    "DihatResult",
    "dihat_proxy",
    "dihat_iteration",
    "run_dihat",
    "GreediConfig",
    "GreediNodeState",
    "GreediResult",
    "run_greedi",
    "run_greedi_reference",
    "run_greedi_centralized",
    "ExperimentConfig",
    "ExperimentTrace",
    "ComparisonResult",
    "TheoryReport",
    "ConfigError",
    "parse_config_text",
    "run_experiment",
    "compare_variants",
    "emit_outputs",
    "verify_theory",
    "PRESETS",
    "get_preset",
    "preset_names",
    "__version__",
]
