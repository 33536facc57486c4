"""Leapfrog integration, Hamiltonian bookkeeping, and gradient accounting.

The kinetic energy uses an identity mass matrix throughout, so the
Hamiltonian is H(theta, p) = ||p||^2 / 2 - log pi(theta).  Adjacent
half-momentum updates are fused, giving exactly L + 1 gradient evaluations
for an L-step trajectory (one at the starting point, one per step).

Example: a flat target (zero gradient) integrated with step 0.1 for 10
steps from (theta, p) = (0, 1) travels in a straight line to theta = 1
with p unchanged.  On the 1-d standard Gaussian the dynamics are a unit
harmonic oscillator, so ~157 steps of size 0.01 rotate (1, 0) a quarter
period onto approximately (0, -1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .targets import TargetModel

__all__ = [
    "PhaseState",
    "LeapfrogConfig",
    "GradientCounter",
    "hamiltonian",
    "leapfrog",
    "leapfrog_ensemble",
    "accept_probability",
    "mh_select",
]


@dataclass(frozen=True)
class PhaseState:
    """A position/momentum pair; ``divergent`` marks non-finite excursions."""

    position: np.ndarray
    momentum: np.ndarray
    divergent: bool = False

    def __post_init__(self):
        if self.position.shape != self.momentum.shape:
            raise ValueError("position and momentum must have equal shapes")


@dataclass(frozen=True)
class LeapfrogConfig:
    """Integrator settings: step size and the per-trajectory step cap."""

    step_size: float
    max_steps: int = 500

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class GradientCounter:
    """Counts log-density gradient evaluations (one unit per theta visited)."""

    count: int = 0

    def add(self, n: int = 1) -> None:
        if n < 0:
            raise ValueError("gradient counts only increase")
        self.count += n


def hamiltonian(state: PhaseState, target: TargetModel) -> float:
    """Total energy ||p||^2 / 2 - log pi(theta); non-finite values propagate."""
    kinetic = 0.5 * float(state.momentum @ state.momentum)
    return kinetic - float(target.log_density(state.position))


def leapfrog(
    state: PhaseState,
    config: LeapfrogConfig,
    n_steps: int,
    target: TargetModel,
    counter: GradientCounter,
) -> PhaseState:
    """Integrate Hamilton's equations for ``n_steps`` leapfrog steps.

    Increments ``counter`` by exactly n_steps + 1.  A non-finite position or
    gradient anywhere along the trajectory returns the state flagged
    divergent; callers treat such proposals as zero-density.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    eps = config.step_size
    pos = np.array(state.position, dtype=np.float64)
    mom = np.array(state.momentum, dtype=np.float64)
    grad = target.grad_log_density(pos)
    counter.add(1)
    if not np.all(np.isfinite(grad)):
        return PhaseState(pos, mom, divergent=True)
    for _ in range(n_steps):
        mom_half = mom + 0.5 * eps * grad
        pos = pos + eps * mom_half
        grad = target.grad_log_density(pos)
        counter.add(1)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(grad))):
            return PhaseState(pos, mom_half, divergent=True)
        mom = mom_half + 0.5 * eps * grad
    return PhaseState(pos, mom)


def leapfrog_ensemble(
    positions: np.ndarray,
    momenta: np.ndarray,
    step_counts: np.ndarray,
    step_size: float,
    target: TargetModel,
    counter: GradientCounter,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized leapfrog over J particles with per-particle step counts.

    Equivalent to calling :func:`leapfrog` particle by particle (gradients
    are only evaluated for particles that still have steps remaining), but
    batches gradient calls across the active subset.  Returns the final
    positions, momenta, and a divergence mask; divergent particles keep
    their last finite-by-construction values and must be discarded by the
    caller.
    """
    step_counts = np.asarray(step_counts, dtype=np.int64)
    if np.any(step_counts < 1):
        raise ValueError("every particle must take at least one step")
    pos = np.array(positions, dtype=np.float64)
    mom = np.array(momenta, dtype=np.float64)
    n = pos.shape[0]
    grad = target.grad_log_density(pos)
    counter.add(n)
    divergent = ~np.all(np.isfinite(grad), axis=1)
    remaining = np.where(divergent, 0, step_counts)
    while True:
        active = np.flatnonzero(remaining > 0)
        if active.size == 0:
            break
        mom_half = mom[active] + 0.5 * step_size * grad[active]
        new_pos = pos[active] + step_size * mom_half
        new_grad = target.grad_log_density(new_pos)
        counter.add(active.size)
        ok = np.all(np.isfinite(new_pos), axis=1) & np.all(np.isfinite(new_grad), axis=1)
        pos[active] = new_pos
        mom[active] = np.where(
            ok[:, None], mom_half + 0.5 * step_size * new_grad, mom_half)
        grad[active] = new_grad
        divergent[active[~ok]] = True
        remaining[active] -= 1
        remaining[active[~ok]] = 0
    return pos, mom, divergent


def accept_probability(
    current: PhaseState, proposed: PhaseState, target: TargetModel,
) -> float:
    """HMC acceptance probability min(1, exp(H(current) - H(proposed)))."""
    if proposed.divergent:
        return 0.0
    delta = hamiltonian(current, target) - hamiltonian(proposed, target)
    if not np.isfinite(delta):
        return 0.0
    return 1.0 if delta >= 0 else float(np.exp(delta))


def mh_select(
    current: PhaseState, proposed: PhaseState, alpha: float, u: float,
) -> PhaseState:
    """Metropolis-Hastings selection: proposed when u < alpha, else current."""
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    return proposed if u < alpha else current
