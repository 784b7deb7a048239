"""Canned experiment configurations.

Each preset is a complete ExperimentConfig; the CLI exposes them under
`greedinet presets` / `greedinet run --preset <name>`. Step sizes follow
the usual LMS rule of thumb (a fraction of 2/lambda_max, with unit-power
regressors) except where a preset documents its own choice.
"""

from .harness import ExperimentConfig

__all__ = ["PRESETS", "get_preset", "preset_names"]


PRESETS = {
    # Batch recovery, moderately underdetermined nodes.
    "exp1": ExperimentConfig(
        algorithm="dihat",
        variant="full",
        n_nodes=20,
        m=70,
        s=10,
        l=55,
        snr_db=20.0,
        iters=60,
        mc_runs=100,
        topology="random_geometric",
        radius=0.5,
        master_seed=101,
    ),
    # Same scenario, twice the sparsity: stresses the pruning step.
    "exp2": ExperimentConfig(
        algorithm="dihat",
        variant="full",
        n_nodes=20,
        m=70,
        s=20,
        l=55,
        snr_db=20.0,
        iters=60,
        mc_runs=100,
        topology="random_geometric",
        radius=0.5,
        master_seed=102,
    ),
    # Severely underdetermined nodes: cooperation on measurements is the
    # only way any node can recover, so the variant gaps are widest here.
    # Ring topology: slow mixing keeps the per-node measurement mixtures
    # diverse through the whole budget, which is where exchanging raw
    # measurements pays off most.
    "exp5-small-l": ExperimentConfig(
        algorithm="dihat",
        variant="full",
        n_nodes=20,
        m=70,
        s=10,
        l=15,
        snr_db=20.0,
        iters=60,
        mc_runs=100,
        topology="ring",
        master_seed=140,
    ),
    # Stationary online estimation with the trace-based adaptive step.
    "exp6": ExperimentConfig(
        algorithm="greedi",
        variant="full",
        n_nodes=10,
        m=100,
        s=10,
        mu=0.15,
        zeta=1.0,
        step_schedule="lemma1_adaptive",
        noise_model="paper",
        horizon=5000,
        mc_runs=100,
        topology="random_geometric",
        radius=0.7,
        master_seed=106,
    ),
    # Tracking: the truth switches from 10-sparse to 15-sparse mid-stream.
    # The algorithm budget s=15 can represent both regimes; zeta < 1
    # discounts stale correlation history so the estimator re-converges.
    "exp7-tracking": ExperimentConfig(
        algorithm="greedi",
        variant="full",
        n_nodes=10,
        m=100,
        s=15,
        truth_s=10,
        switch_at=1451,
        switch_s=15,
        mu=0.15,
        zeta=0.99,
        step_schedule="lemma1_adaptive",
        noise_model="paper",
        horizon=3000,
        mc_runs=100,
        topology="random_geometric",
        radius=0.7,
        master_seed=107,
    ),
    # O(m)-per-node light proxy against the full variant and the fusion
    # center. Ring topology on purpose: with near-complete connectivity the
    # diffusion floor almost matches the centralized one and the comparison
    # degenerates; modest connectivity keeps the three regimes apart.
    "exp8-light": ExperimentConfig(
        algorithm="greedi",
        variant="light",
        n_nodes=10,
        m=100,
        s=10,
        mu=0.15,
        zeta=0.99,
        step_schedule="lemma1_adaptive",
        noise_model="paper",
        horizon=2500,
        mc_runs=100,
        topology="ring",
        master_seed=108,
    ),
}


def preset_names():
    return sorted(PRESETS)


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        from .harness import ConfigError

        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
