"""ChEES trajectory-length adaptation over a particle ensemble.

One SMC iteration proposes every particle with a jittered-length HMC
trajectory (no accept-reject: each proposal is kept and reweighted by the
sampler shell).  During warm-up, a per-particle gradient estimate of the
ChEES criterion

    1/4 E[(||theta' - E theta'||^2 - ||theta - E theta||^2)^2]

drives Adam ascent on log L, a moving average tracks the adapted length,
and at the warm-up boundary L freezes to that average.  Jitter keeps
scaling the frozen length afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .hmc import GradientCounter, LeapfrogConfig, leapfrog_ensemble
from .targets import TargetModel

__all__ = [
    "CheesAdaptState",
    "CheesStepRecord",
    "init_adapt_state",
    "jittered_length",
    "chees_criterion",
    "chees_gradient_estimate",
    "weighted_gradient",
    "adam_update_log_length",
    "update_moving_average",
    "freeze_at_warmup",
    "chees_smc_step",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
DEFAULT_LEARNING_RATE = 0.025
DEFAULT_WARMUP = 100
MOVING_AVERAGE_KEEP = 0.9


@dataclass(frozen=True)
class CheesAdaptState:
    """Adaptation state for the trajectory length L (kept in log-space).

    ``log_bounds`` clamp Adam updates to [log eps, log(max_steps * eps)]:
    below the lower bound a trajectory cannot complete a single step, above
    the upper one the step cap truncates it anyway.  The initial length is
    not clamped; bounds apply to updates only.
    """

    log_length: float
    moving_average: float = 0.0
    adam_m1: float = 0.0
    adam_m2: float = 0.0
    adam_t: int = 0
    warmup_steps: int = DEFAULT_WARMUP
    frozen: bool = False
    learning_rate: float = DEFAULT_LEARNING_RATE
    log_bounds: tuple[float, float] = (-math.inf, math.inf)

    @property
    def length(self) -> float:
        """Current trajectory length L."""
        return math.exp(self.log_length)


@dataclass(frozen=True)
class CheesStepRecord:
    """Everything one ensemble proposal produced, for adaptation and tests.

    ``lengths`` are the continuous jittered lengths l = h * L; the realized
    integer step counts (after the ceil, floor-at-1, and cap rules) are in
    ``step_counts``.  Divergent particles appear here with their proposal
    reverted to the previous position and acceptance weight zero.
    """

    previous: np.ndarray
    proposed: np.ndarray
    momenta: np.ndarray
    final_momenta: np.ndarray
    alphas: np.ndarray
    lengths: np.ndarray
    step_counts: np.ndarray
    divergent: np.ndarray


def init_adapt_state(
    init_length: float,
    step_size: float,
    max_steps: int,
    warmup_steps: int = DEFAULT_WARMUP,
    learning_rate: float = DEFAULT_LEARNING_RATE,
) -> CheesAdaptState:
    """Fresh adaptation state with clamp bounds derived from the integrator."""
    if init_length <= 0:
        raise ValueError("initial trajectory length must be positive")
    if warmup_steps < 1:
        raise ValueError("warmup_steps must be >= 1")
    return CheesAdaptState(
        log_length=math.log(init_length),
        warmup_steps=warmup_steps,
        learning_rate=learning_rate,
        log_bounds=(math.log(step_size), math.log(max_steps * step_size)),
    )


def jittered_length(h: float, length: float, step_size: float, cap: int) -> int:
    """Integer leapfrog step count for one jittered trajectory.

    ceil(h * L / eps), floored at one step and capped at ``cap``.
    """
    if h <= 0 or length <= 0 or step_size <= 0 or cap < 1:
        raise ValueError("jittered_length inputs must be positive")
    return min(cap, max(1, math.ceil(h * length / step_size)))


def chees_criterion(record: CheesStepRecord) -> float:
    """Observed value of the criterion being maximized (non-negative)."""
    d_prop = record.proposed - record.proposed.mean(axis=0)
    d_prev = record.previous - record.previous.mean(axis=0)
    change = np.sum(d_prop * d_prop, axis=1) - np.sum(d_prev * d_prev, axis=1)
    return 0.25 * float(np.mean(change * change))


def chees_gradient_estimate(record: CheesStepRecord) -> np.ndarray:
    """Per-particle gradient estimates of the criterion w.r.t. log L.

    ghat_c = l_c (||theta'_c - mean'||^2 - ||theta_c - mean||^2)
                 (theta'_c - mean')^T p'_c

    p'_c is the momentum at the end of the trajectory: it equals
    d theta'_c / d(integration time), so the inner product is the pathwise
    derivative of the squared-distance change and the estimator's mean
    vanishes exactly where the criterion peaks (on a standard normal the
    criterion is proportional to sin^2(l) and this estimator averages to
    sin(2l); the start momentum instead averages to sin(l), which never
    changes sign before l = pi and drags L past the optimum).

    Ensemble means are plain averages over the record itself, so at least
    two particles are required (with one, both factors are identically 0).
    """
    if record.previous.shape[0] < 2:
        raise ValueError("chees gradient needs >= 2 particles; ensemble means "
                         "degenerate to the single point")
    d_prop = record.proposed - record.proposed.mean(axis=0)
    d_prev = record.previous - record.previous.mean(axis=0)
    change = np.sum(d_prop * d_prop, axis=1) - np.sum(d_prev * d_prev, axis=1)
    inner = np.sum(d_prop * record.final_momenta, axis=1)
    return record.lengths * change * inner


def weighted_gradient(ghat: np.ndarray, alphas: np.ndarray) -> float:
    """Acceptance-weighted mean of per-particle gradient estimates.

    A degenerate iteration (all acceptance weights zero) yields 0; the
    caller skips the Adam update in that case.
    """
    total = float(np.sum(alphas))
    if total == 0.0:
        return 0.0
    return float(np.sum(alphas * ghat) / total)


def adam_update_log_length(state: CheesAdaptState, ghat: float) -> CheesAdaptState:
    """One Adam ascent step on log L (bias-corrected, then clamped)."""
    if state.frozen:
        raise ValueError("adaptation is frozen; no further Adam updates")
    t = state.adam_t + 1
    m1 = ADAM_BETA1 * state.adam_m1 + (1.0 - ADAM_BETA1) * ghat
    m2 = ADAM_BETA2 * state.adam_m2 + (1.0 - ADAM_BETA2) * ghat * ghat
    m1_hat = m1 / (1.0 - ADAM_BETA1 ** t)
    m2_hat = m2 / (1.0 - ADAM_BETA2 ** t)
    step = state.learning_rate * m1_hat / (math.sqrt(m2_hat) + ADAM_EPSILON)
    lo, hi = state.log_bounds
    new_log = min(max(state.log_length + step, lo), hi)
    return replace(state, log_length=new_log, adam_m1=m1, adam_m2=m2, adam_t=t)


def update_moving_average(state: CheesAdaptState) -> CheesAdaptState:
    """L-bar <- 0.9 L-bar + 0.1 L."""
    if state.frozen:
        raise ValueError("adaptation is frozen; moving average is final")
    new_avg = MOVING_AVERAGE_KEEP * state.moving_average + \
        (1.0 - MOVING_AVERAGE_KEEP) * state.length
    return replace(state, moving_average=new_avg)


def freeze_at_warmup(state: CheesAdaptState) -> CheesAdaptState:
    """Fix L to the moving average for all remaining iterations."""
    if state.moving_average <= 0.0:
        raise ValueError("cannot freeze: the moving average was never updated, "
                         "adaptation never ran")
    return replace(state, frozen=True, log_length=math.log(state.moving_average))


def chees_smc_step(
    positions: np.ndarray,
    jitter_column: np.ndarray,
    adapt_state: CheesAdaptState,
    config: LeapfrogConfig,
    target: TargetModel,
    counter: GradientCounter,
    rng: np.random.Generator,
    iteration: int,
) -> tuple[np.ndarray, CheesStepRecord, CheesAdaptState]:
    """Propose all particles and advance the adaptation by one iteration.

    Every particle keeps its proposal (the sampler shell reweights instead
    of accept-rejecting); the acceptance probability is still computed as
    the adaptation weight.  Divergent proposals revert to the previous
    position with weight zero so ensemble means stay finite.  ``iteration``
    is the 1-based SMC iteration index used against the warm-up boundary.
    """
    J = positions.shape[0]
    if J < 2:
        raise ValueError("the ensemble needs >= 2 particles")
    if jitter_column.shape != (J,):
        raise ValueError("jitter column must hold one factor per particle")

    momenta = rng.standard_normal(positions.shape)
    lengths = jitter_column * adapt_state.length
    steps = np.minimum(
        config.max_steps,
        np.maximum(1, np.ceil(lengths / config.step_size).astype(np.int64)))
    new_pos, new_mom, divergent = leapfrog_ensemble(
        positions, momenta, steps, config.step_size, target, counter)

    if divergent.any():
        new_pos = np.where(divergent[:, None], positions, new_pos)
        new_mom = np.where(divergent[:, None], momenta, new_mom)

    energy_start = 0.5 * np.sum(momenta * momenta, axis=1) \
        - target.log_density(positions)
    energy_end = 0.5 * np.sum(new_mom * new_mom, axis=1) \
        - target.log_density(new_pos)
    alphas = np.exp(np.minimum(0.0, energy_start - energy_end))
    alphas[divergent | ~np.isfinite(alphas)] = 0.0

    record = CheesStepRecord(
        previous=positions,
        proposed=new_pos,
        momenta=momenta,
        final_momenta=new_mom,
        alphas=alphas,
        lengths=lengths,
        step_counts=steps,
        divergent=divergent,
    )

    new_state = adapt_state
    if not new_state.frozen:
        if iteration < new_state.warmup_steps:
            ghat = weighted_gradient(chees_gradient_estimate(record), alphas)
            if np.sum(alphas) > 0.0:
                new_state = adam_update_log_length(new_state, ghat)
            new_state = update_moving_average(new_state)
        else:
            new_state = freeze_at_warmup(new_state)
    return new_pos, record, new_state
