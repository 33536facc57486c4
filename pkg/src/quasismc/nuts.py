"""No-U-Turn proposal: recursive tree doubling with slice sampling.

This is the "efficient NUTS" formulation: a slice variable u drawn under
the initial energy gates which leaves are valid candidates, the trajectory
doubles in a random direction each round, and growth stops on a U-turn
(checked for every sub-tree), a divergence, or the depth cap.  Gradients
are cached with each tree endpoint so the cost is exactly one gradient per
leapfrog step plus one for the starting point.

Used here as an SMC proposal: the returned sample is taken as-is (no
accept-reject) and the initial/final momenta feed the momentum-form weight
update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hmc import GradientCounter, LeapfrogConfig
from .targets import TargetModel

__all__ = ["NutsResult", "u_turn", "nuts_step", "DEFAULT_MAX_DEPTH"]

#: Tree-depth cap: a depth-11 tree exhausts a 2^11 leapfrog-step budget.
DEFAULT_MAX_DEPTH = 11

#: Energy-error threshold beyond which a leaf counts as divergent.
DIVERGENCE_THRESHOLD = 1000.0


@dataclass(frozen=True)
class NutsResult:
    """Outcome of one NUTS proposal.

    ``position`` is the selected sample, ``momentum_initial`` the fresh
    momentum the trajectory started from, and ``momentum_final`` the
    momentum at the selected leaf.  ``leftmost``/``rightmost`` are the
    extreme trajectory endpoints, exposed for U-turn diagnostics.
    """

    position: np.ndarray
    momentum_initial: np.ndarray
    momentum_final: np.ndarray
    divergent: bool
    depth: int
    leftmost: np.ndarray
    rightmost: np.ndarray


def u_turn(position_left, position_right, momentum_left, momentum_right) -> bool:
    """True iff the segment from left to right is being retraced.

    Implements the strict-inequality criterion
    (theta+ - theta-) . p- < 0  or  (theta+ - theta-) . p+ < 0.
    """
    span = position_right - position_left
    return bool(span @ momentum_left < 0.0 or span @ momentum_right < 0.0)


class _Leaf:
    """One phase point with its cached gradient and energy."""

    __slots__ = ("position", "momentum", "gradient", "energy")

    def __init__(self, position, momentum, gradient, energy):
        self.position = position
        self.momentum = momentum
        self.gradient = gradient
        self.energy = energy


def _leapfrog_leaf(leaf: _Leaf, eps: float, target: TargetModel,
                   counter: GradientCounter) -> _Leaf | None:
    """One leapfrog step from a cached leaf; None on non-finite results.

    Divergences are detected through the scalar energy alone: any NaN or
    overflow in the position, gradient, or density propagates into it.
    """
    mom_half = leaf.momentum + 0.5 * eps * leaf.gradient
    pos = leaf.position + eps * mom_half
    logp, grad = target.density_and_grad(pos)
    counter.add(1)
    mom = mom_half + 0.5 * eps * grad  # a non-finite gradient lands in mom
    energy = 0.5 * float(mom @ mom) - float(logp)
    if not math.isfinite(energy):
        return None
    return _Leaf(pos, mom, grad, energy)


def _build_tree(leaf, log_u, direction, depth, eps, target, counter, rng):
    """Grow a sub-tree of 2^depth leaves from ``leaf`` in ``direction``.

    Returns (left, right, sample_leaf, n_valid, keep_going); sample_leaf is
    None when no leaf of the sub-tree lies inside the slice.
    """
    if depth == 0:
        new = _leapfrog_leaf(leaf, direction * eps, target, counter)
        if new is None:
            return leaf, leaf, None, 0, False
        n_valid = 1 if log_u <= -new.energy else 0
        keep_going = log_u < DIVERGENCE_THRESHOLD - new.energy
        return new, new, (new if n_valid else None), n_valid, keep_going

    left, right, sample, n_valid, keep_going = _build_tree(
        leaf, log_u, direction, depth - 1, eps, target, counter, rng)
    if not keep_going:
        return left, right, sample, n_valid, False

    if direction == -1:
        left, _, sample2, n2, keep_going = _build_tree(
            left, log_u, direction, depth - 1, eps, target, counter, rng)
    else:
        _, right, sample2, n2, keep_going = _build_tree(
            right, log_u, direction, depth - 1, eps, target, counter, rng)
    total = n_valid + n2
    if n2 > 0 and rng.random() < n2 / total:
        sample = sample2
    if keep_going:
        keep_going = not u_turn(left.position, right.position,
                                left.momentum, right.momentum)
    return left, right, sample, total, keep_going


def nuts_step(
    position: np.ndarray,
    config: LeapfrogConfig,
    max_depth: int,
    target: TargetModel,
    counter: GradientCounter,
    rng: np.random.Generator,
) -> NutsResult:
    """Run one NUTS proposal from ``position``.

    Draws p ~ N(0, I), builds the doubling trajectory, and returns a leaf
    sampled uniformly from the slice-valid candidates.  A non-finite
    density or gradient at the starting point returns the input unchanged
    with the divergence flag raised.
    """
    position = np.asarray(position, dtype=np.float64)
    momentum = rng.standard_normal(position.shape)
    logp, gradient = target.density_and_grad(position)
    counter.add(1)
    if not (np.all(np.isfinite(gradient)) and np.isfinite(logp)):
        return NutsResult(position, momentum, momentum, divergent=True,
                          depth=0, leftmost=position, rightmost=position)
    logp = float(logp)

    energy0 = 0.5 * float(momentum @ momentum) - logp
    start = _Leaf(position, momentum, gradient, energy0)
    # Slice variable: u ~ U(0, exp(-H0)), kept in log space.
    log_u = -energy0 + np.log1p(-rng.random())

    left = right = sample = start
    n_valid = 1
    depth = 0
    # Doubling round j adds a 2^j-step sub-tree; rounds run while the
    # cumulative 2^(j+1) - 1 steps still fit the 2^max_depth step budget
    # (so max_depth = 0 permits exactly the single-step round 0).
    for round_index in range(max(1, max_depth)):
        depth = round_index
        direction = 1 if rng.random() < 0.5 else -1
        if direction == -1:
            left, _, candidate, n_new, keep_going = _build_tree(
                left, log_u, direction, round_index, config.step_size,
                target, counter, rng)
        else:
            _, right, candidate, n_new, keep_going = _build_tree(
                right, log_u, direction, round_index, config.step_size,
                target, counter, rng)
        if keep_going and candidate is not None and \
                rng.random() < n_new / max(n_valid, 1):
            sample = candidate
        n_valid += n_new
        if not keep_going:
            break
        if u_turn(left.position, right.position, left.momentum, right.momentum):
            break

    return NutsResult(
        position=sample.position,
        momentum_initial=momentum,
        momentum_final=sample.momentum,
        divergent=False,
        depth=depth,
        leftmost=left.position,
        rightmost=right.position,
    )
