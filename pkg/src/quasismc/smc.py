"""Sequential-Monte-Carlo sampler shell.

Each iteration runs, in order: weight normalization, effective-sample-size
check, multinomial resampling when the ESS drops below half the ensemble
size, proposal of every particle, and the momentum-form reweighting in
which the integrator Jacobians of the forward proposal and the backward
kernel cancel, leaving

    delta log w = delta log pi + (||p_start||^2 - ||p_end||^2) / 2.

The random-walk proposal is symmetric, so its backward kernel cancels the
proposal density entirely and the increment is delta log pi alone.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .chees import (
    CheesAdaptState,
    chees_smc_step,
    init_adapt_state,
    jittered_length,
)
from .diagnostics import IterationDiagnostics, moment_mse
from .hmc import GradientCounter, LeapfrogConfig, leapfrog_ensemble
from .nuts import DEFAULT_MAX_DEPTH, nuts_step
from .quasirandom import JitterMatrix, JitterScheme, generate_jitter
from .targets import TargetModel, prior_log_density, sample_prior

__all__ = [
    "PROPOSAL_KINDS",
    "ParticleEnsemble",
    "ProposalOutcome",
    "SamplerConfig",
    "RunResult",
    "init_ensemble",
    "normalize_weights",
    "effective_sample_size",
    "multinomial_resample",
    "weight_update",
    "weighted_estimate",
    "weighted_moments",
    "run_smc",
]

PROPOSAL_KINDS = ("rw", "hmc", "nuts", "chees")

# Substream tags; every generator in a run is seeded by a distinct
# (seed, tag, ...) tuple so parallel execution cannot change the output.
_RESAMPLE_TAG = 3
_RW_TAG = 4
_HMC_TAG = 5
_NUTS_TAG = 6
_CHEES_TAG = 7


@dataclass
class ParticleEnsemble:
    """Weighted particle population at one iteration."""

    positions: np.ndarray
    log_weights: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        if self.positions.ndim != 2 or self.positions.shape[0] < 2:
            raise ValueError("positions must be a (J, D) matrix with J >= 2")
        if self.log_weights.shape != (self.positions.shape[0],):
            raise ValueError("need exactly one log-weight per particle")

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class ProposalOutcome:
    """Per-particle result of one proposal sweep.

    Momentum arrays are None for momentum-free proposals (random walk).
    A set divergence flag marks the particle's proposal invalid: its
    position has been reverted to the previous one (keeping estimates
    finite) and the weight update assigns it a -inf increment.
    """

    previous: np.ndarray
    new: np.ndarray
    momentum_initial: Optional[np.ndarray]
    momentum_final: Optional[np.ndarray]
    divergent: np.ndarray
    grad_evals: int


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler-level knobs for one run.

    ``step_size`` doubles as the random-walk scale; gradient-based
    proposals require it to be positive.
    """

    n_particles: int = 1000
    n_iterations: int = 200
    burn_in: int = 100
    proposal: str = "chees"
    jitter: str = "no-jitter"
    step_size: float = 0.1
    init_length: float = 5.0
    max_steps: int = 500
    max_depth: int = DEFAULT_MAX_DEPTH
    adam_learning_rate: float = 0.025
    warmup: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_iterations")
        if self.proposal not in PROPOSAL_KINDS:
            raise ValueError(f"unknown proposal kind {self.proposal!r}")
        JitterScheme.from_name(self.jitter)
        if self.step_size < 0 or (self.proposal != "rw" and self.step_size == 0):
            raise ValueError("step_size must be positive "
                             "(non-negative for the random walk)")
        if self.init_length <= 0:
            raise ValueError("init_length must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.warmup < 1:
            raise ValueError("warmup must be >= 1")
        if self.adam_learning_rate <= 0:
            raise ValueError("adam_learning_rate must be positive")


@dataclass
class RunResult:
    """Everything one seeded run produced."""

    iterations: list[IterationDiagnostics]
    ensemble: ParticleEnsemble
    total_grad_evals: int
    config: SamplerConfig
    recent_positions: list[tuple[int, np.ndarray]] = field(default_factory=list)


def init_ensemble(target: TargetModel, n_particles: int,
                  seed: int) -> ParticleEnsemble:
    """Draw the initial population from the standard-normal prior.

    Initial log-weights are the importance correction log pi - log q0; any
    constant offset shared by all particles drops out at normalization.
    """
    positions = sample_prior(target.dimension, n_particles, seed)
    log_weights = target.log_density(positions) - prior_log_density(positions)
    return ParticleEnsemble(positions=positions, log_weights=log_weights,
                            iteration=0)


def normalize_weights(ensemble: ParticleEnsemble) -> np.ndarray:
    """Self-normalized weights computed stably in log-space.

    Returns probabilities summing to one.  A fully degenerate population
    (every log-weight -inf) cannot be normalized and is a fatal error.
    """
    log_weights = ensemble.log_weights
    peak = np.max(log_weights)
    if peak == -math.inf:
        raise ValueError(
            f"weight degeneracy at iteration {ensemble.iteration}: "
            "all particle weights underflowed to zero")
    shifted = np.exp(log_weights - peak)
    return shifted / np.sum(shifted)


def effective_sample_size(normalized_weights: np.ndarray) -> float:
    """1 / sum of squared normalized weights, between 1 and J."""
    return float(1.0 / np.sum(normalized_weights * normalized_weights))


def multinomial_resample(ensemble: ParticleEnsemble,
                         rng: np.random.Generator) -> ParticleEnsemble:
    """Draw J ancestors i.i.d. from the weight distribution, reset weights.

    The reset unnormalized weight is 1/J, i.e. log-weight -log J.
    """
    weights = normalize_weights(ensemble)
    n = ensemble.n_particles
    ancestors = rng.choice(n, size=n, replace=True, p=weights)
    return ParticleEnsemble(
        positions=ensemble.positions[ancestors].copy(),
        log_weights=np.full(n, -math.log(n)),
        iteration=ensemble.iteration,
    )


def weight_update(previous_log_weights: np.ndarray, outcome: ProposalOutcome,
                  target: TargetModel) -> np.ndarray:
    """Momentum-form weight recursion (symmetric form for the random walk)."""
    increment = target.log_density(outcome.new) \
        - target.log_density(outcome.previous)
    if outcome.momentum_initial is not None:
        kinetic_start = 0.5 * np.sum(
            outcome.momentum_initial * outcome.momentum_initial, axis=-1)
        kinetic_end = 0.5 * np.sum(
            outcome.momentum_final * outcome.momentum_final, axis=-1)
        increment = increment + (kinetic_start - kinetic_end)
    updated = np.asarray(previous_log_weights, dtype=float) + increment
    if outcome.divergent.any():
        updated = np.where(outcome.divergent, -math.inf, updated)
    return updated


def weighted_estimate(ensemble: ParticleEnsemble,
                      f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Self-normalized estimate of E[f(theta)]."""
    weights = normalize_weights(ensemble)
    values = np.asarray(f(ensemble.positions), dtype=float)
    return weights @ values


def weighted_moments(ensemble: ParticleEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean and plug-in variance (no small-sample correction)."""
    weights = normalize_weights(ensemble)
    mean = weights @ ensemble.positions
    second = weights @ (ensemble.positions * ensemble.positions)
    return mean, second - mean * mean


def _substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed,) + key))


def _propose_rw(positions: np.ndarray, step_size: float,
                rng: np.random.Generator) -> ProposalOutcome:
    noise = rng.standard_normal(positions.shape)
    return ProposalOutcome(
        previous=positions,
        new=positions + step_size * noise,
        momentum_initial=None,
        momentum_final=None,
        divergent=np.zeros(positions.shape[0], dtype=bool),
        grad_evals=0,
    )


def _propose_hmc(positions: np.ndarray, config: SamplerConfig,
                 target: TargetModel, counter: GradientCounter,
                 rng: np.random.Generator) -> ProposalOutcome:
    momenta = rng.standard_normal(positions.shape)
    n_steps = jittered_length(1.0, config.init_length, config.step_size,
                              config.max_steps)
    before = counter.count
    new_pos, new_mom, divergent = leapfrog_ensemble(
        positions, momenta,
        np.full(positions.shape[0], n_steps, dtype=np.int64),
        config.step_size, target, counter)
    if divergent.any():
        new_pos = np.where(divergent[:, None], positions, new_pos)
        new_mom = np.where(divergent[:, None], momenta, new_mom)
    return ProposalOutcome(
        previous=positions,
        new=new_pos,
        momentum_initial=momenta,
        momentum_final=new_mom,
        divergent=divergent,
        grad_evals=counter.count - before,
    )


def _propose_nuts(positions: np.ndarray, config: SamplerConfig,
                  target: TargetModel, counter: GradientCounter,
                  seed: int, iteration: int) -> ProposalOutcome:
    n, dim = positions.shape
    leapfrog = LeapfrogConfig(step_size=config.step_size,
                              max_steps=config.max_steps)
    new_pos = np.empty_like(positions)
    mom_init = np.empty_like(positions)
    mom_final = np.empty_like(positions)
    before = counter.count
    for j in range(n):
        rng = _substream(seed, _NUTS_TAG, iteration, j)
        result = nuts_step(positions[j], leapfrog, config.max_depth, target,
                           counter, rng)
        new_pos[j] = result.position
        mom_init[j] = result.momentum_initial
        mom_final[j] = result.momentum_final
    # The returned sample is always a finite pre-divergence leaf (a
    # truncated trajectory merely stops growing), so no proposal here is
    # ever invalid and the momentum-form update applies to every particle.
    return ProposalOutcome(
        previous=positions,
        new=new_pos,
        momentum_initial=mom_init,
        momentum_final=mom_final,
        divergent=np.zeros(n, dtype=bool),
        grad_evals=counter.count - before,
    )


def run_smc(config: SamplerConfig, target: TargetModel) -> RunResult:
    """Run the sampler for ``config.n_iterations`` iterations.

    Per iteration the recorded effective sample size is the pre-resampling
    value the resampling decision is made on; moment estimates use the
    weights after reweighting.  The last 20 iterations' positions are kept
    for scatter output.
    """
    ensemble = init_ensemble(target, config.n_particles, config.seed)
    counter = GradientCounter()
    leapfrog = LeapfrogConfig(step_size=config.step_size,
                              max_steps=config.max_steps) \
        if config.proposal != "rw" else None

    adapt_state: Optional[CheesAdaptState] = None
    jitter_matrix: Optional[JitterMatrix] = None
    if config.proposal == "chees":
        adapt_state = init_adapt_state(
            config.init_length, config.step_size, config.max_steps,
            warmup_steps=config.warmup,
            learning_rate=config.adam_learning_rate)
        jitter_matrix = generate_jitter(
            JitterScheme.from_name(config.jitter), config.n_particles,
            config.n_iterations, config.seed)

    diagnostics: list[IterationDiagnostics] = []
    recent: deque[tuple[int, np.ndarray]] = deque(maxlen=20)

    for k in range(1, config.n_iterations + 1):
        weights = normalize_weights(ensemble)
        j_eff = effective_sample_size(weights)
        resampled = j_eff < config.n_particles / 2.0
        if resampled:
            ensemble = multinomial_resample(
                ensemble, _substream(config.seed, _RESAMPLE_TAG, k))

        grads_before = counter.count
        if config.proposal == "rw":
            current_length = 0.0
            outcome = _propose_rw(ensemble.positions, config.step_size,
                                  _substream(config.seed, _RW_TAG, k))
        elif config.proposal == "hmc":
            current_length = config.init_length
            outcome = _propose_hmc(ensemble.positions, config, target,
                                   counter,
                                   _substream(config.seed, _HMC_TAG, k))
        elif config.proposal == "nuts":
            current_length = 0.0
            outcome = _propose_nuts(ensemble.positions, config, target,
                                    counter, config.seed, k)
        else:
            current_length = adapt_state.length
            new_pos, record, adapt_state = chees_smc_step(
                ensemble.positions, jitter_matrix.column(k - 1), adapt_state,
                leapfrog, target, counter,
                _substream(config.seed, _CHEES_TAG, k), k)
            outcome = ProposalOutcome(
                previous=record.previous,
                new=new_pos,
                momentum_initial=record.momenta,
                momentum_final=record.final_momenta,
                divergent=record.divergent,
                grad_evals=counter.count - grads_before,
            )

        new_log_weights = weight_update(ensemble.log_weights, outcome, target)
        ensemble = ParticleEnsemble(positions=outcome.new,
                                    log_weights=new_log_weights, iteration=k)

        est_mean, est_var = weighted_moments(ensemble)
        mse_mean = moment_mse(est_mean, target.true_mean) \
            if target.true_mean is not None else None
        mse_var = moment_mse(est_var, target.true_variance) \
            if target.true_variance is not None else None
        diagnostics.append(IterationDiagnostics(
            iteration=k,
            j_eff=j_eff,
            grad_evals=counter.count - grads_before,
            cumulative_grad_evals=counter.count,
            est_mean=est_mean,
            est_var=est_var,
            mse_mean=mse_mean,
            mse_var=mse_var,
            resampled=resampled,
            current_length=current_length,
        ))
        recent.append((k, ensemble.positions.copy()))

    return RunResult(
        iterations=diagnostics,
        ensemble=ensemble,
        total_grad_evals=counter.count,
        config=config,
        recent_positions=list(recent),
    )
