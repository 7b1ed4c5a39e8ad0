import numpy as np
import pytest

from prgf_attack.estimators import (
    expected_beta,
    expected_beta_subspace,
    lambda_star,
    lambda_star_subspace,
    mu_star,
    mu_star_subspace,
    mu_star_subspace_exact,
)
from prgf_attack.exceptions import DomainError


class TestLambdaStar:
    def test_branches(self):
        assert lambda_star(0.0, 10, 100) == 0.0
        assert lambda_star(1.0, 10, 100) == 1.0

    def test_boundaries_belong_to_constant_branches(self):
        D, q = 100, 10
        span = D + 2 * q - 2
        assert lambda_star(1.0 / span, q, D) == 0.0
        assert lambda_star((2 * q - 1) / span, q, D) == 1.0

    @pytest.mark.parametrize('D,q', [(10, 2), (100, 10), (3072, 50)])
    def test_anchor_at_one_over_d(self, D, q):
        assert lambda_star(1.0 / D, q, D) == pytest.approx(1.0 / D, abs=1e-12)

    def test_non_decreasing_in_alpha(self):
        values = [lambda_star(a, 10, 100) for a in np.linspace(0.0, 1.0, 2001)]
        assert np.all(np.diff(values) >= -1e-12)

    def test_non_increasing_in_q(self):
        values = [lambda_star(0.05, q, 100) for q in range(1, 60)]
        assert np.all(np.diff(values) <= 1e-12)

    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            lambda_star(1.5, 10, 100)
        with pytest.raises(DomainError):
            lambda_star(0.5, 0, 100)


class TestLambdaStarSubspace:
    def test_no_energy_returns_one(self):
        assert lambda_star_subspace(0.2, 0.0, 10, 50) == 1.0

    @pytest.mark.parametrize('alpha_sq', [0.0, 0.005, 0.02, 0.08, 0.15, 0.5, 1.0])
    def test_complement_subspace_matches_full_space(self, alpha_sq):
        D, q = 100, 10
        full = lambda_star(alpha_sq, q, D)
        sub = lambda_star_subspace(alpha_sq, 1.0 - alpha_sq, q, D - 1)
        assert sub == pytest.approx(full, abs=1e-12)

    def test_range(self):
        for a2 in np.linspace(0.0, 0.5, 51):
            assert 0.0 <= lambda_star_subspace(a2, 0.5, 10, 20) <= 1.0


class TestMuStar:
    def test_endpoints(self):
        e = expected_beta(10, 100)
        assert mu_star(0.0, e) == 0.0
        assert mu_star(1.0, e) == pytest.approx(1.0)

    def test_increasing_in_alpha_decreasing_in_beta(self):
        alphas = np.linspace(0.01, 0.99, 99)
        assert np.all(np.diff([mu_star(a, 0.3) for a in alphas]) > 0)
        betas = np.linspace(0.01, 0.99, 99)
        assert np.all(np.diff([mu_star(0.4, e) for e in betas]) < 0)

    def test_rejects_degenerate_beta(self):
        with pytest.raises(DomainError):
            mu_star(0.5, 0.0)

    def test_subspace_approximation(self):
        assert mu_star_subspace(0.0, 0.0) == 0.0
        assert mu_star_subspace(0.3, 0.1) == pytest.approx(0.75)

    def test_exact_subspace_without_overlap(self):
        assert mu_star_subspace_exact(0.3, 0.0, 0.8, 0.2) == pytest.approx(0.3 / 0.5)

    def test_exact_subspace_clipped(self):
        assert 0.0 <= mu_star_subspace_exact(0.05, 0.6, 0.7, 0.5) <= 1.0


def test_expected_beta():
    assert expected_beta(10, 100) == pytest.approx(np.sqrt(10 / 109))
    assert expected_beta_subspace(0.5, 10, 91) == pytest.approx(0.5 * np.sqrt(0.1))
