"""Sequential Monte Carlo sampling with quasi-random trajectory-length
jitter: low-discrepancy sequences, leapfrog/NUTS/ChEES proposals, the
weighted-particle sampler shell, and the benchmark metrics."""

from .chees import CheesAdaptState, chees_smc_step, init_adapt_state
from .diagnostics import (
    ClassificationReport,
    IterationDiagnostics,
    RunSummary,
    classification_report,
    ess_per_grad,
    moment_mse,
    summarize_run,
)
from .hmc import GradientCounter, LeapfrogConfig, PhaseState, leapfrog
from .nuts import NutsResult, nuts_step
from .quasirandom import JitterMatrix, JitterScheme, generate_jitter
from .smc import (
    ParticleEnsemble,
    SamplerConfig,
    RunResult,
    effective_sample_size,
    init_ensemble,
    multinomial_resample,
    normalize_weights,
    run_smc,
    weight_update,
    weighted_estimate,
)
from .targets import (
    TargetModel,
    banana_target,
    gaussian_target,
    ill_conditioned_target,
    load_german_credit,
    logistic_target,
)

__version__ = "0.1.0"

__all__ = [
    "CheesAdaptState",
    "ClassificationReport",
    "GradientCounter",
    "IterationDiagnostics",
    "JitterMatrix",
    "JitterScheme",
    "LeapfrogConfig",
    "NutsResult",
    "ParticleEnsemble",
    "PhaseState",
    "RunResult",
    "RunSummary",
    "SamplerConfig",
    "TargetModel",
    "banana_target",
    "chees_smc_step",
    "classification_report",
    "effective_sample_size",
    "ess_per_grad",
    "gaussian_target",
    "generate_jitter",
    "ill_conditioned_target",
    "init_adapt_state",
    "init_ensemble",
    "leapfrog",
    "load_german_credit",
    "logistic_target",
    "moment_mse",
    "multinomial_resample",
    "normalize_weights",
    "nuts_step",
    "run_smc",
    "summarize_run",
    "weight_update",
    "weighted_estimate",
]
