"""Sampler shell: weighting identities, resampling, and the weight update."""

import math

import numpy as np
import pytest
from scipy import stats

from quasismc.hmc import GradientCounter, LeapfrogConfig, PhaseState, leapfrog
from quasismc.smc import (
    ParticleEnsemble,
    ProposalOutcome,
    RunResult,
    SamplerConfig,
    effective_sample_size,
    init_ensemble,
    multinomial_resample,
    normalize_weights,
    run_smc,
    weight_update,
    weighted_estimate,
    weighted_moments,
)
from quasismc.targets import (
    TargetModel,
    banana_target,
    gaussian_target,
    prior_log_density,
    sample_prior,
)


def scalar_normal_target():
    return TargetModel(
        name="normal-1d",
        dimension=1,
        log_density=lambda theta: -0.5 * np.sum(theta * theta, axis=-1),
        grad_log_density=lambda theta: -theta,
    )


def make_ensemble(log_weights, positions=None, iteration=0):
    log_weights = np.asarray(log_weights, dtype=float)
    if positions is None:
        positions = np.zeros((log_weights.shape[0], 2))
    return ParticleEnsemble(positions=np.asarray(positions, dtype=float),
                            log_weights=log_weights, iteration=iteration)


class TestInitEnsemble:
    def test_prior_target_gives_uniform_weights(self):
        prior_as_target = TargetModel(
            name="prior", dimension=3,
            log_density=prior_log_density,
            grad_log_density=lambda theta: -theta)
        ensemble = init_ensemble(prior_as_target, 64, seed=0)
        np.testing.assert_allclose(normalize_weights(ensemble),
                                   np.full(64, 1.0 / 64), atol=1e-15)

    def test_normalized_weights_sum_to_one(self):
        ensemble = init_ensemble(gaussian_target(), 500, seed=1)
        assert abs(normalize_weights(ensemble).sum() - 1.0) < 1e-12

    def test_two_particle_weight_ratio_matches_densities(self):
        target = scalar_normal_target()
        ensemble = init_ensemble(target, 2, seed=3)
        theta = ensemble.positions
        expected = np.exp(
            (target.log_density(theta) - prior_log_density(theta)))
        expected /= expected.sum()
        np.testing.assert_allclose(normalize_weights(ensemble), expected,
                                   rtol=1e-12)

    def test_positions_come_from_the_shared_prior_sampler(self):
        ensemble = init_ensemble(gaussian_target(), 16, seed=9)
        np.testing.assert_array_equal(ensemble.positions,
                                      sample_prior(5, 16, 9))


class TestNormalizeWeights:
    def test_equal_log_weights(self):
        ensemble = make_ensemble(np.full(10, -3.7))
        np.testing.assert_allclose(normalize_weights(ensemble),
                                   np.full(10, 0.1), atol=1e-15)

    def test_dominant_weight(self):
        ensemble = make_ensemble([0.0, -math.inf])
        np.testing.assert_array_equal(normalize_weights(ensemble), [1.0, 0.0])

    def test_agrees_with_naive_arithmetic_at_small_magnitudes(self):
        rng = np.random.default_rng(2)
        logs = rng.uniform(-3, 3, size=50)
        naive = np.exp(logs) / np.exp(logs).sum()
        np.testing.assert_allclose(
            normalize_weights(make_ensemble(logs)), naive, atol=1e-12)

    def test_total_degeneracy_names_the_iteration(self):
        ensemble = make_ensemble([-math.inf, -math.inf], iteration=7)
        with pytest.raises(ValueError, match="iteration 7"):
            normalize_weights(ensemble)

    def test_large_magnitudes_do_not_overflow(self):
        ensemble = make_ensemble([5000.0, 5000.0, 4990.0])
        weights = normalize_weights(ensemble)
        assert np.isfinite(weights).all()
        assert abs(weights.sum() - 1.0) < 1e-12


class TestEffectiveSampleSize:
    def test_uniform_weights(self):
        assert effective_sample_size(np.full(1000, 1e-3)) == pytest.approx(
            1000.0, rel=1e-12)

    def test_full_degeneracy(self):
        weights = np.zeros(50)
        weights[17] = 1.0
        assert effective_sample_size(weights) == 1.0

    def test_hand_example(self):
        assert effective_sample_size(np.array([0.5, 0.25, 0.25])) == \
            pytest.approx(8.0 / 3.0, rel=1e-14)


class TestMultinomialResample:
    def test_degenerate_weights_copy_one_particle(self):
        positions = np.arange(10.0).reshape(5, 2)
        logs = np.full(5, -math.inf)
        logs[3] = 0.0
        ensemble = make_ensemble(logs, positions)
        out = multinomial_resample(ensemble, np.random.default_rng(0))
        np.testing.assert_array_equal(out.positions,
                                      np.tile(positions[3], (5, 1)))

    def test_weights_reset_to_uniform(self):
        ensemble = make_ensemble(np.linspace(-1, 1, 8))
        out = multinomial_resample(ensemble, np.random.default_rng(1))
        np.testing.assert_array_equal(out.log_weights,
                                      np.full(8, -math.log(8)))
        assert effective_sample_size(normalize_weights(out)) == \
            pytest.approx(8.0, rel=1e-12)

    def test_offspring_counts_follow_the_multinomial(self):
        # 200 independent resamples of 50 uniformly weighted particles:
        # aggregate offspring counts against the flat expectation with a
        # chi-square test at the 99% level.
        n = 50
        repeats = 200
        ensemble = make_ensemble(np.zeros(n), np.arange(n, dtype=float)
                                 .reshape(n, 1))
        counts = np.zeros(n)
        for r in range(repeats):
            out = multinomial_resample(ensemble, np.random.default_rng(100 + r))
            idx = out.positions[:, 0].astype(int)
            counts += np.bincount(idx, minlength=n)
        expected = repeats * 1.0
        statistic = np.sum((counts - expected) ** 2 / expected)
        assert statistic < stats.chi2.ppf(0.99, n - 1)


def _run_leapfrog(theta, momentum, step_size, n_steps, target):
    state = PhaseState(position=np.asarray(theta, dtype=float),
                       momentum=np.asarray(momentum, dtype=float))
    out = leapfrog(state, LeapfrogConfig(step_size=step_size, max_steps=1000),
                   n_steps, target, GradientCounter())
    return out.position, out.momentum


def _numerical_jacobian(f, x, delta=1e-5):
    x = np.asarray(x, dtype=float)
    columns = []
    for i in range(x.size):
        bump = np.zeros_like(x)
        bump[i] = delta
        columns.append((f(x + bump) - f(x - bump)) / (2.0 * delta))
    return np.stack(columns, axis=1)


def _explicit_kernel_increment(theta0, p0, step_size, n_steps, target):
    """Full L-kernel/proposal-ratio weight increment with numerical
    integrator Jacobians (no cancellation assumed)."""
    theta1, p1 = _run_leapfrog(theta0, p0, step_size, n_steps, target)
    jac_forward = _numerical_jacobian(
        lambda p: _run_leapfrog(theta0, p, step_size, n_steps, target)[0], p0)
    jac_reverse = _numerical_jacobian(
        lambda p: _run_leapfrog(theta1, p, step_size, n_steps, target)[0], -p1)
    delta_log_pi = float(target.log_density(theta1) - target.log_density(theta0))
    log_momentum_ratio = 0.5 * float(p0 @ p0 - p1 @ p1)
    _, logdet_forward = np.linalg.slogdet(jac_forward)
    _, logdet_reverse = np.linalg.slogdet(jac_reverse)
    return delta_log_pi + log_momentum_ratio + logdet_forward - logdet_reverse


class TestWeightUpdate:
    def test_identity_move_increment_is_zero(self):
        positions = np.array([[0.5, -1.0]])
        momenta = np.array([[1.0, 2.0]])
        outcome = ProposalOutcome(
            previous=positions, new=positions,
            momentum_initial=momenta, momentum_final=momenta,
            divergent=np.array([False]), grad_evals=0)
        out = weight_update(np.array([0.25]), outcome, banana_target())
        np.testing.assert_array_equal(out, [0.25])

    def test_energy_conserving_move_increment_is_zero(self):
        # Quarter rotation of the unit oscillator: (0, 1) -> (1, 0).
        # Potential rises by 1/2 while kinetic energy falls by 1/2.
        target = scalar_normal_target()
        outcome = ProposalOutcome(
            previous=np.array([[0.0]]), new=np.array([[1.0]]),
            momentum_initial=np.array([[1.0]]),
            momentum_final=np.array([[0.0]]),
            divergent=np.array([False]), grad_evals=0)
        out = weight_update(np.array([0.0]), outcome, target)
        np.testing.assert_allclose(out, [0.0], atol=1e-15)

    def test_divergent_particle_gets_minus_infinity(self):
        positions = np.zeros((2, 1))
        outcome = ProposalOutcome(
            previous=positions, new=positions,
            momentum_initial=np.ones((2, 1)), momentum_final=np.ones((2, 1)),
            divergent=np.array([False, True]), grad_evals=0)
        out = weight_update(np.zeros(2), outcome, scalar_normal_target())
        assert out[0] == 0.0
        assert out[1] == -math.inf

    def test_random_walk_increment_is_density_ratio_only(self):
        target = scalar_normal_target()
        outcome = ProposalOutcome(
            previous=np.array([[1.0]]), new=np.array([[2.0]]),
            momentum_initial=None, momentum_final=None,
            divergent=np.array([False]), grad_evals=0)
        out = weight_update(np.array([0.0]), outcome, target)
        np.testing.assert_allclose(out, [-2.0 + 0.5], atol=1e-15)

    @pytest.mark.parametrize("target_factory,dim", [
        (scalar_normal_target, 1),
        (banana_target, 2),
    ])
    def test_momentum_form_equals_explicit_jacobian_form(self, target_factory,
                                                         dim):
        # The forward-map and reverse-map Jacobian determinants of the
        # integrator cancel; verify against their finite-difference values.
        target = target_factory()
        rng = np.random.default_rng(42)
        for _ in range(10):
            theta0 = rng.normal(size=dim)
            p0 = rng.normal(size=dim)
            n_steps = int(rng.integers(1, 6))
            explicit = _explicit_kernel_increment(theta0, p0, 0.1, n_steps,
                                                  target)
            theta1, p1 = _run_leapfrog(theta0, p0, 0.1, n_steps, target)
            outcome = ProposalOutcome(
                previous=theta0[None, :], new=theta1[None, :],
                momentum_initial=p0[None, :], momentum_final=p1[None, :],
                divergent=np.array([False]), grad_evals=0)
            simplified = weight_update(np.zeros(1), outcome, target)[0]
            assert abs(simplified - explicit) < 1e-8


class TestWeightedEstimates:
    def test_uniform_weights_recover_arithmetic_mean(self):
        positions = np.arange(12.0).reshape(6, 2)
        ensemble = make_ensemble(np.zeros(6), positions)
        np.testing.assert_allclose(
            weighted_estimate(ensemble, lambda theta: theta),
            positions.mean(axis=0), rtol=1e-14)

    def test_degenerate_weights_pick_one_particle(self):
        positions = np.array([[1.0, 2.0], [3.0, 4.0]])
        ensemble = make_ensemble([0.0, -math.inf], positions)
        np.testing.assert_array_equal(
            weighted_estimate(ensemble, lambda theta: theta), [1.0, 2.0])

    def test_variance_estimate_on_exact_normal_draws(self):
        rng = np.random.default_rng(11)
        positions = rng.standard_normal((1_000_000, 1))
        ensemble = make_ensemble(np.zeros(1_000_000), positions)
        _, var = weighted_moments(ensemble)
        assert abs(var[0] - 1.0) < 0.01

    def test_moments_match_manual_plug_in_form(self):
        rng = np.random.default_rng(5)
        positions = rng.normal(size=(40, 3))
        logs = rng.uniform(-1, 1, size=40)
        ensemble = make_ensemble(logs, positions)
        weights = normalize_weights(ensemble)
        mean, var = weighted_moments(ensemble)
        np.testing.assert_allclose(mean, weights @ positions, rtol=1e-12)
        np.testing.assert_allclose(
            var, weights @ positions ** 2 - (weights @ positions) ** 2,
            rtol=1e-12)


class TestRunSmc:
    def test_zero_scale_random_walk_is_static_after_first_iteration(self):
        config = SamplerConfig(n_particles=64, n_iterations=8, burn_in=0,
                               proposal="rw", step_size=0.0, seed=5)
        result = run_smc(config, gaussian_target())
        first = result.recent_positions[0][1]
        for _, positions in result.recent_positions[1:]:
            np.testing.assert_array_equal(positions, first)
        # Weight increments are all zero, so after the first resample the
        # ESS sits at J and no further resampling happens.
        for diag in result.iterations[1:]:
            if not diag.resampled:
                assert diag.j_eff == pytest.approx(
                    result.iterations[0].j_eff if not
                    result.iterations[0].resampled else 64.0, rel=1e-9)

    def test_identical_config_gives_identical_diagnostics(self):
        config = SamplerConfig(n_particles=50, n_iterations=12, burn_in=0,
                               proposal="chees", jitter="1d-halton",
                               step_size=0.1, warmup=5, seed=3)
        target = gaussian_target()
        a = run_smc(config, target)
        b = run_smc(config, target)
        assert a.total_grad_evals == b.total_grad_evals
        np.testing.assert_array_equal(a.ensemble.positions,
                                      b.ensemble.positions)
        np.testing.assert_array_equal(a.ensemble.log_weights,
                                      b.ensemble.log_weights)
        for da, db in zip(a.iterations, b.iterations):
            assert da.j_eff == db.j_eff
            assert da.grad_evals == db.grad_evals
            np.testing.assert_array_equal(da.est_mean, db.est_mean)
            assert da.mse_mean == db.mse_mean
            assert da.resampled == db.resampled

    @pytest.mark.parametrize("proposal,kwargs", [
        ("rw", {"step_size": 0.3}),
        ("hmc", {"step_size": 0.1, "init_length": 1.0}),
        ("chees", {"step_size": 0.1, "jitter": "1d-halton", "warmup": 10}),
    ])
    def test_ess_bounds_and_resampling_rule(self, proposal, kwargs):
        config = SamplerConfig(n_particles=100, n_iterations=25, burn_in=0,
                               proposal=proposal, seed=7, **kwargs)
        result = run_smc(config, gaussian_target())
        for diag in result.iterations:
            assert 1.0 <= diag.j_eff <= 100.0 + 1e-9
            assert diag.resampled == (diag.j_eff < 50.0)

    def test_random_walk_estimator_consistency(self):
        # Weighted mean after K iterations within 5 standard errors of the
        # true mean, per coordinate.  The walk scale must let particles
        # traverse from the prior at the origin to means at +-4 within the
        # run, so it is set near the target's own scale.
        target = gaussian_target()
        config = SamplerConfig(n_particles=10_000, n_iterations=200,
                               burn_in=100, proposal="rw", step_size=2.0,
                               seed=13)
        result = run_smc(config, target)
        final = result.iterations[-1]
        standard_error = np.sqrt(target.true_variance / final.j_eff)
        np.testing.assert_array_less(
            np.abs(final.est_mean - target.true_mean), 5.0 * standard_error)

    def test_hmc_counts_gradients_per_iteration(self):
        config = SamplerConfig(n_particles=20, n_iterations=4, burn_in=0,
                               proposal="hmc", step_size=0.1, init_length=0.5,
                               seed=2)
        result = run_smc(config, gaussian_target())
        for diag in result.iterations:
            # ceil(0.5 / 0.1) = 5 steps -> 6 evaluations per particle.
            assert diag.grad_evals == 20 * 6
        assert result.total_grad_evals == 4 * 20 * 6

    def test_nuts_proposal_runs_and_counts_gradients(self):
        config = SamplerConfig(n_particles=16, n_iterations=3, burn_in=0,
                               proposal="nuts", step_size=0.3, max_depth=6,
                               seed=4)
        result = run_smc(config, gaussian_target())
        assert result.total_grad_evals > 0
        for diag in result.iterations:
            assert diag.grad_evals >= 16 * 2
            assert np.isfinite(diag.est_mean).all()
        assert result.ensemble.positions.shape == (16, 5)

    def test_chees_length_adapts_then_freezes(self):
        config = SamplerConfig(n_particles=64, n_iterations=12, burn_in=0,
                               proposal="chees", jitter="nd-halton",
                               step_size=0.1, warmup=6, init_length=2.0,
                               seed=8)
        result = run_smc(config, gaussian_target())
        lengths = [diag.current_length for diag in result.iterations]
        assert lengths[0] == pytest.approx(2.0)
        assert len({repr(length) for length in lengths[6:]}) == 1

    def test_mse_columns_match_direct_recomputation(self):
        target = gaussian_target()
        config = SamplerConfig(n_particles=128, n_iterations=10, burn_in=0,
                               proposal="chees", jitter="1d-halton",
                               warmup=5, seed=6)
        result = run_smc(config, target)
        for diag in result.iterations:
            expected = float(np.mean((diag.est_mean - target.true_mean) ** 2))
            assert diag.mse_mean == pytest.approx(expected, abs=1e-12)
            assert diag.mse_var >= 0.0

    def test_impossible_target_raises_degeneracy_error(self):
        impossible = TargetModel(
            name="impossible", dimension=1,
            log_density=lambda theta: np.full(theta.shape[:-1], -math.inf),
            grad_log_density=lambda theta: np.zeros_like(theta))
        config = SamplerConfig(n_particles=8, n_iterations=2, burn_in=0,
                               proposal="rw", step_size=0.1, seed=0)
        with pytest.raises(ValueError, match="iteration 0"):
            run_smc(config, impossible)

    def test_recent_positions_window_is_capped_at_twenty(self):
        config = SamplerConfig(n_particles=16, n_iterations=25, burn_in=0,
                               proposal="rw", step_size=0.2, seed=1)
        result = run_smc(config, gaussian_target())
        iterations = [k for k, _ in result.recent_positions]
        assert iterations == list(range(6, 26))


class TestSamplerConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError, match="n_particles"):
            SamplerConfig(n_particles=1)
        with pytest.raises(ValueError, match="burn_in"):
            SamplerConfig(n_iterations=10, burn_in=10)
        with pytest.raises(ValueError, match="proposal"):
            SamplerConfig(proposal="metropolis")
        with pytest.raises(ValueError, match="jitter"):
            SamplerConfig(jitter="2d-halton")
        with pytest.raises(ValueError, match="step_size"):
            SamplerConfig(proposal="hmc", step_size=0.0)
        with pytest.raises(ValueError, match="warmup"):
            SamplerConfig(warmup=0)

    def test_zero_step_size_allowed_for_random_walk_only(self):
        config = SamplerConfig(proposal="rw", step_size=0.0)
        assert config.step_size == 0.0
