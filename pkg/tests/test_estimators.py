import numpy as np
import pytest

from prgf_attack.estimators import (
    GA_THRESHOLD,
    EstimatorConfig,
    GaImpl,
    Variant,
    estimate_gradient,
    expected_beta,
    mu_star,
    prgf_bs_estimate,
    prgf_ga_estimate,
    rgf_estimate,
)
from prgf_attack.exceptions import DomainError, InvalidBasisError
from prgf_attack.geometry import SeededRng, nn_upsample_basis
from prgf_attack.oracles import LinearOracle, Oracle, Phase
from prgf_attack.scalar_estimation import NormCache, ScalarState
from prgf_attack.verify import prior_with_cosine

from .conftest import unit

D = 100
Q = 10


@pytest.fixture
def gradient():
    return SeededRng(99).normal(D)


@pytest.fixture
def backend(gradient):
    return LinearOracle(gradient)


def known_norm_state(gradient):
    return ScalarState(NormCache.fixed(np.linalg.norm(gradient)))


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def config(variant, **kwargs):
    return EstimatorConfig(q=Q, sigma=1e-4, D=D, variant=variant, **kwargs)


class TestConfig:
    def test_rejects_bad_q(self):
        with pytest.raises(DomainError):
            EstimatorConfig(q=0, sigma=1e-4, D=D)

    def test_rejects_full_dimensional_subspace(self):
        with pytest.raises(InvalidBasisError):
            EstimatorConfig(q=Q, sigma=1e-4, D=D, dd_basis=nn_upsample_basis(D, D))

    def test_rejects_fixed_coefficient_out_of_range(self):
        with pytest.raises(DomainError):
            EstimatorConfig(q=Q, sigma=1e-4, D=D, fixed_mu=1.5)

    def test_variant_parse(self):
        assert Variant.parse('prgf-bs') is Variant.PRGF_BS
        assert GaImpl.parse('closed-form') is GaImpl.CLOSED_FORM


class TestRgf:
    def test_query_count(self, backend):
        oracle = Oracle(backend)
        cfg = config(Variant.RGF)
        assert rgf_estimate(oracle, np.zeros(D), 0, cfg, None, SeededRng(1)).queries_used == Q + 1
        assert rgf_estimate(oracle, np.zeros(D), 0, cfg, None, SeededRng(1), 0.0).queries_used == Q

    def test_mean_cosine_matches_expected_beta(self, backend, gradient):
        oracle = Oracle(backend)
        cfg = config(Variant.RGF)
        rng = SeededRng(5)
        cosines = [cosine(rgf_estimate(oracle, np.zeros(D), 0, cfg, None, rng, 0.0).direction, gradient)
                   for _ in range(2000)]
        assert np.mean(cosines) == pytest.approx(expected_beta(Q, D), abs=0.02)

    def test_subspace_estimate_stays_in_subspace(self, backend):
        basis = nn_upsample_basis(10, D)
        cfg = config(Variant.RGF, dd_basis=basis)
        estimate = rgf_estimate(Oracle(backend), np.zeros(D), 0, cfg, None, SeededRng(2), 0.0)
        np.testing.assert_allclose(basis.project(estimate.direction), estimate.direction, atol=1e-10)


class TestBiasedSampling:
    def test_aligned_prior_is_returned(self, backend, gradient):
        oracle = Oracle(backend)
        v = unit(gradient)
        estimate = prgf_bs_estimate(oracle, np.zeros(D), 0, v, config(Variant.PRGF_BS),
                                    known_norm_state(gradient), SeededRng(1))
        assert estimate.prior_returned and estimate.coefficient == 1.0
        np.testing.assert_allclose(estimate.direction, v)
        assert estimate.queries_used == 2
        assert oracle.ledger.count(Phase.ALPHA) == 1

    def test_opposite_prior_is_flipped(self, backend, gradient):
        estimate = prgf_bs_estimate(Oracle(backend), np.zeros(D), 0, -unit(gradient), config(Variant.PRGF_BS),
                                    known_norm_state(gradient), SeededRng(1))
        assert estimate.prior_returned
        assert cosine(estimate.direction, gradient) == pytest.approx(1.0)

    def test_fixed_lambda_skips_scalar_queries(self, backend, gradient, rng):
        oracle = Oracle(backend)
        v = prior_with_cosine(gradient, 0.3, rng)
        estimate = prgf_bs_estimate(oracle, np.zeros(D), 0, v, config(Variant.PRGF_BS, fixed_lambda=0.05),
                                    ScalarState(NormCache()), SeededRng(1))
        assert estimate.coefficient == 0.05
        assert estimate.queries_used == Q + 1
        assert oracle.ledger.count(Phase.ALPHA) == 0 and oracle.ledger.count(Phase.NORM) == 0

    def test_interior_lambda_spends_q_probes(self, backend, gradient, rng):
        oracle = Oracle(backend)
        v = prior_with_cosine(gradient, 0.3, rng)
        estimate = prgf_bs_estimate(oracle, np.zeros(D), 0, v, config(Variant.PRGF_BS),
                                    known_norm_state(gradient), SeededRng(1))
        assert 0.0 < estimate.coefficient < 1.0
        assert estimate.alpha == pytest.approx(0.3, abs=1e-6)
        assert estimate.queries_used == Q + 2

    def test_zero_gradient_falls_back_to_rgf(self):
        oracle = Oracle(LinearOracle(np.zeros(D)))
        state = ScalarState(NormCache(probes=5))
        estimate = prgf_bs_estimate(oracle, np.zeros(D), 0, unit(np.ones(D)), config(Variant.PRGF_BS),
                                    state, SeededRng(1))
        assert estimate.coefficient == pytest.approx(1.0 / D)
        assert estimate.queries_used == 1 + 5 + Q

    def test_subspace_variant(self, backend, gradient, rng):
        basis = nn_upsample_basis(20, D)
        oracle = Oracle(backend)
        v = prior_with_cosine(gradient, 0.2, rng)
        state = ScalarState(NormCache(probes=10))
        estimate = prgf_bs_estimate(oracle, np.zeros(D), 0, v, config(Variant.PRGF_BS, dd_basis=basis),
                                    state, SeededRng(1))
        assert estimate.subspace_energy is not None
        assert oracle.ledger.count(Phase.NORM) == 20


class TestGradientAveraging:
    def test_aligned_prior_is_returned(self, backend, gradient):
        estimate = prgf_ga_estimate(Oracle(backend), np.zeros(D), 0, unit(gradient), config(Variant.PRGF_GA),
                                    known_norm_state(gradient), SeededRng(1))
        assert estimate.prior_returned
        assert estimate.coefficient >= GA_THRESHOLD

    def test_projection_beats_prior(self, backend, gradient, rng):
        oracle = Oracle(backend)
        v = prior_with_cosine(gradient, 0.3, rng)
        estimate = prgf_ga_estimate(oracle, np.zeros(D), 0, v, config(Variant.PRGF_GA),
                                    known_norm_state(gradient), SeededRng(1))
        assert not estimate.prior_returned
        assert estimate.queries_used == 1 + 1 + Q + 2
        assert cosine(estimate.direction, gradient) >= 0.3 - 1e-9
        assert np.linalg.norm(estimate.direction) <= np.linalg.norm(gradient) * (1 + 1e-6)
        assert 0.0 <= estimate.coefficient <= 1.0

    def test_closed_form_uses_mu_star(self, backend, gradient, rng):
        v = prior_with_cosine(gradient, 0.3, rng)
        cfg = config(Variant.PRGF_GA, ga_impl=GaImpl.CLOSED_FORM)
        estimate = prgf_ga_estimate(Oracle(backend), np.zeros(D), 0, v, cfg, known_norm_state(gradient),
                                    SeededRng(1))
        assert estimate.coefficient == pytest.approx(mu_star(0.3, expected_beta(Q, D)), abs=1e-6)
        assert estimate.queries_used == 1 + 1 + Q

    def test_fixed_mu(self, backend, gradient, rng):
        oracle = Oracle(backend)
        v = prior_with_cosine(gradient, 0.3, rng)
        estimate = prgf_ga_estimate(oracle, np.zeros(D), 0, v, config(Variant.PRGF_GA, fixed_mu=0.5),
                                    ScalarState(NormCache()), SeededRng(1))
        assert estimate.coefficient == 0.5
        assert oracle.ledger.count(Phase.ALPHA) == 0 and oracle.ledger.count(Phase.NORM) == 0

    def test_fixed_mu_one_returns_prior(self, backend, rng, gradient):
        v = prior_with_cosine(gradient, 0.3, rng)
        estimate = prgf_ga_estimate(Oracle(backend), np.zeros(D), 0, v, config(Variant.PRGF_GA, fixed_mu=1.0),
                                    ScalarState(NormCache()), SeededRng(1))
        assert estimate.prior_returned and estimate.queries_used == 1

    def test_deterministic_replay(self, backend, gradient, rng):
        v = prior_with_cosine(gradient, 0.3, rng)
        runs = [prgf_ga_estimate(Oracle(backend), np.zeros(D), 0, v, config(Variant.PRGF_GA),
                                 known_norm_state(gradient), SeededRng(42)).direction for _ in range(2)]
        np.testing.assert_array_equal(runs[0], runs[1])


def test_priors_improve_mean_cosine(backend, gradient):
    v = prior_with_cosine(gradient, 0.3, SeededRng(3))
    oracle = Oracle(backend)
    rng = SeededRng(4)
    means = {}
    for variant in (Variant.RGF, Variant.PRGF_BS, Variant.PRGF_GA):
        cfg = config(variant)
        means[variant] = np.mean([
            cosine(estimate_gradient(oracle, np.zeros(D), 0, v, cfg, known_norm_state(gradient), rng).direction,
                   gradient)
            for _ in range(1000)
        ])
    assert means[Variant.PRGF_BS] > max(means[Variant.RGF], 0.3)
    assert means[Variant.PRGF_GA] > max(means[Variant.RGF], 0.3)


def test_dispatch_without_prior_is_rgf(backend, gradient):
    oracle = Oracle(backend)
    estimate = estimate_gradient(oracle, np.zeros(D), 0, None, config(Variant.PRGF_GA),
                                 known_norm_state(gradient), SeededRng(1))
    assert not estimate.prior_returned
    assert oracle.ledger.total == Q + 1
