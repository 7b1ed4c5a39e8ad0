import csv

import numpy as np
import pytest

from prgf_attack.estimators import expected_beta, lambda_star, mu_star
from prgf_attack.estimators.coefficients import expected_beta_subspace, mu_star_subspace_exact
from prgf_attack.exceptions import DomainError
from prgf_attack.geometry import BiasedSampler, BiasedSubspaceSampler, SeededRng, UniformSampler, gram_schmidt
from prgf_attack.verify import (
    CURVE_HEADER,
    bs_objective,
    check_anchors,
    check_biased_sampling_loss,
    check_coefficient_optimality,
    check_dominance,
    check_monotonicity,
    check_rgf_loss,
    check_subspace_closed_forms,
    corrupted_lambda_star,
    emit_loss_curves,
    f_mu_subspace_optimum,
    ga_objective,
    ga_optimum_value,
    grid_argopt,
    monte_carlo_beta,
    monte_carlo_loss,
    monte_carlo_loss_ga,
    prior_outside_subspace,
    prior_with_cosine,
    run_verification_battery,
    sampler_closed_form_loss,
    theoretical_loss_bs,
    theoretical_loss_bs_subspace,
    theoretical_loss_ga,
    theoretical_loss_ga_subspace,
    write_loss_curves_csv,
)


class TestClosedForms:
    def test_uniform_probes_give_rgf_loss(self, rng):
        grad = rng.normal(30)
        loss = sampler_closed_form_loss(UniformSampler(30), grad, 5)
        assert loss == pytest.approx(float(grad @ grad) * 29 / 34, rel=1e-12)

    @pytest.mark.parametrize('alpha', [0.0, 0.3, 0.9])
    def test_bs_at_inverse_dim_is_rgf(self, alpha):
        D, q = 100, 10
        assert theoretical_loss_bs(alpha, 1.0 / D, q, D) == pytest.approx((D - 1) / (D + q - 1), abs=1e-12)

    def test_bs_endpoint_is_transfer(self):
        assert theoretical_loss_bs(0.4, 1.0, 10, 100) == pytest.approx(1.0 - 0.16)

    def test_ga_endpoints(self):
        assert theoretical_loss_ga(0.4, 0.0, 0.3) == pytest.approx(1.0 - 0.09)
        assert theoretical_loss_ga(0.4, 1.0, 0.3) == pytest.approx(1.0 - 0.16)

    @pytest.mark.parametrize('alpha,e_beta', [(0.5, 0.5), (0.2, 0.3), (0.8, 0.1)])
    def test_ga_optimum_value(self, alpha, e_beta):
        mu = mu_star(alpha, e_beta)
        assert float(ga_objective(mu, alpha, e_beta)) == pytest.approx(ga_optimum_value(alpha, e_beta), abs=1e-12)

    @pytest.mark.parametrize('alpha,A,q,d', [(0.2, 0.6, 10, 50), (0.0, 1.0, 1, 1), (0.5, 0.3, 20, 7)])
    def test_bs_subspace_without_bias(self, alpha, A, q, d):
        expected = 1.0 - A ** 2 * q / (d + q - 1)
        assert theoretical_loss_bs_subspace(alpha, A, 0.0, q, d) == pytest.approx(expected, abs=1e-12)

    def test_bs_subspace_endpoint_is_transfer(self):
        assert theoretical_loss_bs_subspace(0.4, 0.5, 1.0, 10, 20) == pytest.approx(1.0 - 0.16)

    def test_bs_subspace_matches_second_moment(self, rng):
        grad = rng.normal(30)
        basis = gram_schmidt(list(rng.normal((5, 30))))
        prior = prior_outside_subspace(grad, basis, 0.7, rng)
        unit_grad = grad / np.linalg.norm(grad)
        alpha = float(prior @ unit_grad)
        energy = float(np.linalg.norm(basis.project(unit_grad)))
        expected = sampler_closed_form_loss(BiasedSubspaceSampler(prior, basis, 0.3), grad, 4) / float(grad @ grad)
        assert theoretical_loss_bs_subspace(alpha, energy, 0.3, 4, 5) == pytest.approx(expected, abs=1e-12)

    def test_exact_subspace_mu_reaches_optimum(self):
        alpha, alpha1, A, e_beta = 0.3, 0.1, 0.8, 0.3
        mu = mu_star_subspace_exact(alpha, alpha1, A, e_beta)
        assert mu == pytest.approx(0.5)
        reached = 1.0 - theoretical_loss_ga_subspace(alpha, alpha1, A, mu, e_beta)
        assert reached == pytest.approx(f_mu_subspace_optimum(alpha, alpha1, A, e_beta), abs=1e-12)
        assert reached == pytest.approx(0.09 / 0.5234375, abs=1e-12)

    def test_exact_subspace_mu_beats_grid(self, rng):
        for _ in range(10):
            grad = rng.normal(40)
            basis = gram_schmidt(list(rng.normal((8, 40))))
            unit_grad = grad / np.linalg.norm(grad)
            v = rng.normal(40)
            v = v / np.linalg.norm(v) * np.sign(v @ unit_grad)
            in_subspace = basis.project(unit_grad)
            alpha, alpha1 = float(v @ unit_grad), float(v @ in_subspace)
            A = float(np.linalg.norm(in_subspace))
            e_beta = expected_beta_subspace(A, 5, 8)
            mu = mu_star_subspace_exact(alpha, alpha1, A, e_beta)
            reached = 1.0 - theoretical_loss_ga_subspace(alpha, alpha1, A, mu, e_beta)
            _, best = grid_argopt(lambda grid: ga_objective(grid, alpha, e_beta, alpha1 / A ** 2), 0.0, 1.0, 10_001)
            assert best <= reached + 1e-10

    def test_ga_subspace_needs_gradient_in_subspace(self):
        with pytest.raises(DomainError):
            theoretical_loss_ga_subspace(0.3, 0.0, 0.0, 0.5, 0.2)

    def test_objectives_are_vectorized(self):
        grid = np.linspace(0.0, 1.0, 7)
        assert bs_objective(grid, 0.1, 10, 100).shape == (7,)
        assert ga_objective(grid, 0.3, 0.2).shape == (7,)
        assert isinstance(bs_objective(0.5, 0.1, 10, 100), float)


class TestGridArgopt:
    def test_finds_maximum(self):
        arg, value = grid_argopt(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, 11)
        assert arg == pytest.approx(0.3)
        assert value == pytest.approx(0.0, abs=1e-15)

    def test_minimize(self):
        arg, _ = grid_argopt(lambda x: (x - 0.7) ** 2, 0.0, 1.0, 11, maximize=False)
        assert arg == pytest.approx(0.7)

    def test_ties_go_to_smallest_argument(self):
        assert grid_argopt(lambda x: 1.0, 0.0, 1.0, 5) == (0.0, 1.0)

    def test_needs_two_points(self):
        with pytest.raises(DomainError):
            grid_argopt(lambda x: x, 0.0, 1.0, 1)

    def test_lambda_star_maximizes_objective(self):
        alpha_sq, q, D = 0.05, 10, 100
        lam = lambda_star(alpha_sq, q, D)
        assert 0.0 < lam < 1.0
        _, best = grid_argopt(lambda grid: bs_objective(grid, alpha_sq, q, D), 0.0, 1.0, 100_001)
        assert best - float(bs_objective(lam, alpha_sq, q, D)) <= 1e-8


class TestMonteCarlo:
    def test_requires_enough_trials(self, rng):
        with pytest.raises(DomainError):
            monte_carlo_loss(UniformSampler(10), rng.normal(10), 3, 999, rng)
        with pytest.raises(DomainError):
            run_verification_battery(10)

    def test_uniform_loss_matches(self, rng):
        report = monte_carlo_loss(UniformSampler(12), rng.normal(12), 3, 20000, rng)
        assert report.trials == 20000
        assert not report.degenerate
        assert abs(report.z_score) < 5

    def test_biased_loss_matches(self, rng):
        grad = rng.normal(40)
        prior = prior_with_cosine(grad, 0.4, rng)
        report = monte_carlo_loss(BiasedSampler(prior, 0.3), grad, 5, 20000, rng)
        assert abs(report.z_score) < 5

    def test_beta_close_to_approximation(self, rng):
        report = monte_carlo_beta(rng.normal(100), 10, 5000, rng)
        assert report.closed_form == pytest.approx(expected_beta(10, 100))
        assert report.estimate == pytest.approx(report.closed_form, abs=0.02)

    def test_gradient_averaging_loss_matches(self, rng):
        grad = rng.normal(50)
        prior = prior_with_cosine(grad, 0.5, rng)
        report = monte_carlo_loss_ga(prior, grad, 0.4, 5, 5000, rng)
        assert abs(report.z_score) < 5


class TestPriorConstruction:
    def test_prior_with_cosine(self, rng):
        grad = rng.normal(20)
        prior = prior_with_cosine(grad, 0.35, rng)
        assert np.linalg.norm(prior) == pytest.approx(1.0)
        assert prior @ grad / np.linalg.norm(grad) == pytest.approx(0.35)

    def test_prior_outside_subspace(self, rng):
        grad = rng.normal(20)
        basis = gram_schmidt(list(rng.normal((4, 20))))
        prior = prior_outside_subspace(grad, basis, 0.6, rng)
        assert np.linalg.norm(prior) == pytest.approx(1.0)
        assert np.allclose(basis.matrix @ prior, 0.0, atol=1e-12)


class TestLossCurves:
    def test_rows_and_constant_rgf(self):
        rows = emit_loss_curves()
        assert len(rows) == 101
        for row in rows:
            assert row.loss_rgf == pytest.approx(3071 / 3121, abs=1e-12)
            assert row.loss_transfer == pytest.approx(1.0 - row.alpha ** 2)

    def test_optimal_estimators_beat_baselines(self):
        for row in emit_loss_curves():
            floor = min(row.loss_rgf, row.loss_transfer)
            assert row.loss_bs <= floor + 1e-12
            assert row.loss_ga <= floor + 1e-12

    def test_averaging_not_worse_than_biased_sampling(self):
        for row in emit_loss_curves():
            assert row.loss_ga <= row.loss_bs + 1e-5
            if row.alpha >= 0.01:
                assert row.loss_ga <= row.loss_bs

    def test_rejects_alpha_outside_unit_interval(self):
        with pytest.raises(DomainError):
            emit_loss_curves(alpha_grid=[0.5, 1.5])

    def test_csv(self, tmp_path):
        path = tmp_path / 'nested' / 'curves.csv'
        write_loss_curves_csv(emit_loss_curves(D=100, q=10, alpha_grid=[0.0, 0.5, 1.0]), path)
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
        assert rows[0] == CURVE_HEADER
        assert len(rows) == 4
        assert rows[1][0] == '0'
        assert float(rows[3][2]) == 0.0
        assert float(rows[2][1]) == pytest.approx(99 / 109, rel=1e-11)


class TestChecks:
    def test_rgf_loss_check(self):
        result = check_rgf_loss(20000, SeededRng(3))
        assert result.passed
        assert result.name == 'rgf_loss'

    def test_biased_sampling_check(self):
        result = check_biased_sampling_loss(5000, SeededRng(4), configs=3)
        assert result.passed, result.detail

    def test_deterministic_checks_pass(self):
        assert check_coefficient_optimality(SeededRng(5), configs=10).passed
        assert check_anchors(SeededRng(6)).passed
        assert check_monotonicity(SeededRng(7), configs=5).passed
        assert check_dominance(SeededRng(8), configs=5).passed

    def test_subspace_closed_forms_check(self):
        result = check_subspace_closed_forms(SeededRng(9), configs=10, grid_points=10_001)
        assert result.passed, result.detail
        assert result.name == 'subspace_closed_forms'
        assert set(result.values) == {'bs_subspace_loss', 'bs_subspace_anchor', 'mu_subspace_optimum',
                                      'mu_subspace_gap'}

    def test_corrupted_lambda_is_caught(self):
        assert not check_anchors(SeededRng(6), lambda_fn=corrupted_lambda_star).passed
        assert not check_coefficient_optimality(SeededRng(5), lambda_fn=corrupted_lambda_star, configs=10).passed

    @pytest.mark.slow
    def test_battery_reports_every_check(self):
        results = run_verification_battery(1000, seed=0, lambda_fn=corrupted_lambda_star, configs=2)
        names = [r.name for r in results]
        assert names == [
            'rgf_loss',
            'biased_sampling_loss',
            'biased_sampling_subspace_loss',
            'gradient_averaging_loss',
            'gradient_averaging_subspace_loss',
            'coefficient_optimality',
            'anchors',
            'monotonicity',
            'dominance',
            'subspace_closed_forms',
        ]
        by_name = {r.name: r for r in results}
        assert not by_name['anchors'].passed
        assert not by_name['coefficient_optimality'].passed
