"""
Verification oracles

Closed-form expected losses of the estimators, their Monte Carlo
counterparts on exact linear models, brute-force grid optimization of the
coefficient objectives, loss-curve tables, and the battery run by
`prgf verify`.

All Monte Carlo checks use exact directional derivatives (u . g), so only
sampling noise separates an estimate from its closed form.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from .estimators.coefficients import (
    expected_beta,
    expected_beta_subspace,
    lambda_star,
    lambda_star_subspace,
    mu_star,
    mu_star_subspace_exact,
)
from .exceptions import DomainError
from .geometry import (
    BiasedSampler,
    BiasedSubspaceSampler,
    Sampler,
    SeededRng,
    SubspaceBasis,
    SubspaceSampler,
    UniformSampler,
    gram_schmidt,
)

logger = logging.getLogger('prgf.verify')

MIN_TRIALS = 1000
CHUNK_ELEMENTS = 4_000_000
Z_LIMIT = 5.0


@dataclass(frozen=True)
class MonteCarloReport:
    estimate: float
    std_error: float
    trials: int
    closed_form: float
    z_score: float
    degenerate: bool = False


def _z(estimate: float, closed_form: float, std_error: float) -> float:
    if std_error > 0:
        return (estimate - closed_form) / std_error
    return 0.0 if abs(estimate - closed_form) <= 1e-12 * max(1.0, abs(closed_form)) else float('inf')


def _check_trials(trials: int):
    if trials < MIN_TRIALS:
        raise DomainError(f"At least {MIN_TRIALS} trials are required, got {trials}")


def _chunks(trials: int, q: int, dim: int):
    size = max(1, CHUNK_ELEMENTS // max(q * dim, 1))
    done = 0
    while done < trials:
        step = min(size, trials - done)
        yield step
        done += step


def _rgf_draws(sampler: Sampler, grad: np.ndarray, q: int, n: int, rng: SeededRng) -> np.ndarray:
    """n exact RGF estimates (1/q) sum (u_i . g) u_i, shape (n, D)"""
    probes = sampler.draw_batch(n * q, rng).reshape(n, q, sampler.dim)
    return np.einsum('nq,nqd->nd', probes @ grad, probes) / q


def _ratio_loss(grad: np.ndarray, a: np.ndarray, b: np.ndarray) -> Tuple[float, float, bool]:
    """
    ||g||^2 - mean(a)^2 / mean(b) with a delta-method standard error

    a holds g . g_hat and b holds ||g_hat||^2 per trial.
    """
    trials = len(a)
    a_mean, b_mean = float(np.mean(a)), float(np.mean(b))
    g_sq = float(grad @ grad)
    if b_mean == 0.0:
        return g_sq, 0.0, True
    estimate = g_sq - a_mean ** 2 / b_mean
    jacobian = np.array([-2.0 * a_mean / b_mean, a_mean ** 2 / b_mean ** 2])
    covariance = np.cov(np.vstack([a, b]))
    variance = float(jacobian @ covariance @ jacobian) / trials
    return estimate, float(np.sqrt(max(variance, 0.0))), False


def sampler_closed_form_loss(sampler: Sampler, grad: np.ndarray, q: int) -> float:
    """
    Expected loss of the RGF estimator with the given probe distribution

    ||g||^2 - (g'Cg)^2 / ((1 - 1/q) ||Cg||^2 + (1/q) g'Cg), C = E[u u^T].
    """
    grad = np.asarray(grad, dtype=np.float64)
    cg = sampler.apply_second_moment(grad)
    g_cg = float(grad @ cg)
    denominator = (1.0 - 1.0 / q) * float(cg @ cg) + g_cg / q
    if denominator == 0.0:
        return float(grad @ grad)
    return float(grad @ grad) - g_cg ** 2 / denominator


def monte_carlo_loss(sampler: Sampler, grad: np.ndarray, q: int, trials: int, rng: SeededRng,
                     closed_form: Optional[float] = None) -> MonteCarloReport:
    """
    Monte Carlo loss of the RGF estimator under `sampler` on a linear model

    The closed form defaults to sampler_closed_form_loss for the same sampler.
    """
    _check_trials(trials)
    if q < 1:
        raise DomainError(f"q must be >= 1, got {q}")
    grad = np.asarray(grad, dtype=np.float64)
    a_parts, b_parts = [], []
    for n in _chunks(trials, q, sampler.dim):
        estimates = _rgf_draws(sampler, grad, q, n, rng)
        a_parts.append(estimates @ grad)
        b_parts.append(np.sum(estimates ** 2, axis=1))
    estimate, std_error, degenerate = _ratio_loss(grad, np.concatenate(a_parts), np.concatenate(b_parts))
    if closed_form is None:
        closed_form = sampler_closed_form_loss(sampler, grad, q)
    if degenerate:
        return MonteCarloReport(estimate, 0.0, trials, closed_form, float('nan'), True)
    return MonteCarloReport(estimate, std_error, trials, closed_form, _z(estimate, closed_form, std_error))


def _random_sampler(basis: Optional[SubspaceBasis], dim: int) -> Sampler:
    return SubspaceSampler(basis) if basis is not None else UniformSampler(dim)


def monte_carlo_beta(grad: np.ndarray, q: int, trials: int, rng: SeededRng,
                     basis: Optional[SubspaceBasis] = None) -> MonteCarloReport:
    """
    Empirical E[cos(g_rgf, grad)] against its closed-form approximation

    With a basis the probes are drawn in the subspace and the approximation
    is A sqrt(q / (d + q - 1)).
    """
    _check_trials(trials)
    grad = np.asarray(grad, dtype=np.float64)
    sampler = _random_sampler(basis, grad.shape[0])
    cosines = []
    unit_grad = grad / np.linalg.norm(grad)
    for n in _chunks(trials, q, sampler.dim):
        estimates = _rgf_draws(sampler, grad, q, n, rng)
        norms = np.linalg.norm(estimates, axis=1)
        cosines.append(np.where(norms > 0, (estimates @ unit_grad) / np.where(norms > 0, norms, 1.0), 0.0))
    cosines = np.concatenate(cosines)
    estimate = float(np.mean(cosines))
    std_error = float(np.std(cosines, ddof=1) / np.sqrt(trials))
    if basis is None:
        closed_form = expected_beta(q, grad.shape[0])
    else:
        energy = float(np.linalg.norm(basis.project(unit_grad)))
        closed_form = float(energy * np.sqrt(q / (basis.d + q - 1)))
    return MonteCarloReport(estimate, std_error, trials, closed_form, _z(estimate, closed_form, std_error))


def monte_carlo_loss_ga(v: np.ndarray, grad: np.ndarray, mu: float, q: int, trials: int, rng: SeededRng,
                        basis: Optional[SubspaceBasis] = None, e_beta: Optional[float] = None) -> MonteCarloReport:
    """
    Monte Carlo loss of mu v + (1 - mu) normalize(g_rgf) on a linear model

    E[beta] for the closed form is measured on an independent batch unless
    given; its sampling error is folded into the standard error.
    """
    _check_trials(trials)
    v = np.asarray(v, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    sampler = _random_sampler(basis, grad.shape[0])
    beta_error = 0.0
    if e_beta is None:
        beta_report = monte_carlo_beta(grad, q, trials, rng, basis)
        e_beta, beta_error = beta_report.estimate, beta_report.std_error

    a_parts, b_parts = [], []
    for n in _chunks(trials, q, sampler.dim):
        estimates = _rgf_draws(sampler, grad, q, n, rng)
        norms = np.linalg.norm(estimates, axis=1, keepdims=True)
        directions = np.where(norms > 0, estimates / np.where(norms > 0, norms, 1.0), 0.0)
        combined = mu * v + (1.0 - mu) * directions
        a_parts.append(combined @ grad)
        b_parts.append(np.sum(combined ** 2, axis=1))
    estimate, std_error, degenerate = _ratio_loss(grad, np.concatenate(a_parts), np.concatenate(b_parts))

    g_sq = float(grad @ grad)
    unit_grad = grad / np.sqrt(g_sq)
    alpha = float(v @ unit_grad)
    if basis is None:
        def closed(e: float) -> float:
            return g_sq * theoretical_loss_ga(alpha, mu, e)
    else:
        in_subspace = basis.project(unit_grad)
        energy = float(np.linalg.norm(in_subspace))
        alpha1 = float(v @ in_subspace)

        def closed(e: float) -> float:
            return g_sq * theoretical_loss_ga_subspace(alpha, alpha1, energy, mu, e)

    closed_form = closed(e_beta)
    if beta_error > 0:
        h = 1e-6
        slope = (closed(min(e_beta + h, 1.0)) - closed(max(e_beta - h, 0.0))) / (2 * h)
        std_error = float(np.hypot(std_error, slope * beta_error))
    if degenerate:
        return MonteCarloReport(estimate, 0.0, trials, closed_form, float('nan'), True)
    return MonteCarloReport(estimate, std_error, trials, closed_form, _z(estimate, closed_form, std_error))


# Closed-form objectives (vectorized over the coefficient)

ArrayLike = Union[float, np.ndarray]


def _safe_ratio(numerator, denominator):
    numerator = np.asarray(numerator, dtype=np.float64)
    denominator = np.asarray(denominator, dtype=np.float64)
    safe = np.where(denominator == 0.0, 1.0, denominator)
    result = np.where(denominator == 0.0, 0.0, numerator / safe)
    return float(result) if result.ndim == 0 else result


def bs_objective(lam: ArrayLike, alpha_sq: float, q: int, D: int) -> ArrayLike:
    """Squared cosine-like objective maximized by lambda* (full space)"""
    lam = np.asarray(lam, dtype=np.float64)
    rest = (1.0 - lam) / (D - 1)
    first = lam * alpha_sq + rest * (1.0 - alpha_sq)
    second = lam ** 2 * alpha_sq + rest ** 2 * (1.0 - alpha_sq)
    return _safe_ratio(first ** 2, (1.0 - 1.0 / q) * second + first / q)


def bs_objective_subspace(lam: ArrayLike, alpha_sq: float, A_sq: float, q: int, d: int) -> ArrayLike:
    """Objective maximized by the subspace lambda*"""
    lam = np.asarray(lam, dtype=np.float64)
    rest = (1.0 - lam) / d
    first = lam * alpha_sq + rest * A_sq
    second = lam ** 2 * alpha_sq + rest ** 2 * A_sq
    return _safe_ratio(first ** 2, (1.0 - 1.0 / q) * second + first / q)


def ga_objective(mu: ArrayLike, alpha: float, e_beta: float, cross: Optional[float] = None) -> ArrayLike:
    """
    Squared cosine of mu v + (1 - mu) g_bar with the gradient

    `cross` is the expected v . g_bar over E[beta]; it equals alpha in full
    space and alpha1 / A^2 in a subspace.
    """
    mu = np.asarray(mu, dtype=np.float64)
    cross = alpha if cross is None else cross
    numerator = (mu * alpha + (1.0 - mu) * e_beta) ** 2
    denominator = mu ** 2 + (1.0 - mu) ** 2 + 2.0 * mu * (1.0 - mu) * cross * e_beta
    return _safe_ratio(numerator, denominator)


def theoretical_loss_bs(alpha: float, lam: float, q: int, D: int) -> float:
    """Normalized expected loss of biased sampling with weight lam"""
    if lam == 1.0:
        return 1.0 - alpha ** 2
    return 1.0 - bs_objective(lam, alpha ** 2, q, D)


def theoretical_loss_bs_subspace(alpha: float, A: float, lam: float, q: int, d: int) -> float:
    """Normalized expected loss of biased subspace sampling (prior orthogonal to the subspace)"""
    if lam == 1.0:
        return 1.0 - alpha ** 2
    return 1.0 - bs_objective_subspace(lam, alpha ** 2, A ** 2, q, d)


def theoretical_loss_ga(alpha: float, mu: float, e_beta: float) -> float:
    """Normalized expected loss of gradient averaging with weight mu"""
    if mu == 0.0:
        return 1.0 - e_beta ** 2
    if mu == 1.0:
        return 1.0 - alpha ** 2
    return 1.0 - ga_objective(mu, alpha, e_beta)


def theoretical_loss_ga_subspace(alpha: float, alpha1: float, A: float, mu: float, e_beta: float) -> float:
    """
    Normalized expected loss of gradient averaging with subspace probes

    With g the normalized gradient and P the projection onto the subspace,
    A = ||P g|| and alpha1 = v . P g.
    """
    if mu == 0.0:
        return 1.0 - e_beta ** 2
    if mu == 1.0:
        return 1.0 - alpha ** 2
    if A == 0.0:
        raise DomainError("The gradient has no component in the subspace")
    return 1.0 - ga_objective(mu, alpha, e_beta, alpha1 / A ** 2)


def ga_optimum_value(alpha: float, e_beta: float) -> float:
    """Objective value at the optimal mu (full space)"""
    return (alpha ** 2 + e_beta ** 2 - 2 * alpha ** 2 * e_beta ** 2) / (1 - alpha ** 2 * e_beta ** 2)


def f_mu_subspace_optimum(alpha: float, alpha1: float, A: float, e_beta: float) -> float:
    """Objective value at the exact optimal subspace mu"""
    a4 = A ** 4
    return (a4 * (alpha ** 2 + e_beta ** 2) - 2 * A ** 2 * alpha * alpha1 * e_beta ** 2) / (a4 - alpha1 ** 2 * e_beta ** 2)


def bs_interior_optimum_value(alpha_sq: float, q: int, D: int) -> float:
    """Objective value at lambda* when lambda* is strictly inside (0, 1)"""
    span = D + 2 * q - 2
    numerator = 4 * alpha_sq * (1 - alpha_sq) * (q - 1) * q
    denominator = -1 + 2 * alpha_sq * (D * (2 * q - 1) + 2 * (q - 1) ** 2) - alpha_sq ** 2 * span ** 2
    return numerator / denominator


def grid_argopt(objective: Callable, lo: float, hi: float, points: int,
                maximize: bool = True) -> Tuple[float, float]:
    """
    Dense grid search; ties go to the smallest argument

    The objective is called once on the whole grid when it is vectorized and
    point by point otherwise.
    """
    if points < 2:
        raise DomainError(f"A grid needs at least 2 points, got {points}")
    grid = np.linspace(lo, hi, points)
    values = np.asarray(objective(grid), dtype=np.float64)
    if values.shape != grid.shape:
        values = np.array([float(objective(value)) for value in grid])
    index = int(np.argmax(values) if maximize else np.argmin(values))
    return float(grid[index]), float(values[index])


# Loss curves

CURVE_HEADER = ['alpha', 'loss_rgf', 'loss_transfer', 'loss_bs', 'loss_ga']


@dataclass(frozen=True)
class LossCurveRow:
    alpha: float
    loss_rgf: float
    loss_transfer: float
    loss_bs: float
    loss_ga: float


def emit_loss_curves(D: int = 3072, q: int = 50, alpha_grid: Optional[Sequence[float]] = None) -> List[LossCurveRow]:
    """
    Normalized expected losses of each estimator as functions of alpha

    GA uses the closed-form approximation of E[beta].
    """
    if alpha_grid is None:
        alpha_grid = np.linspace(0.0, 1.0, 101)
    e_beta = expected_beta(q, D)
    rows = []
    for alpha in alpha_grid:
        alpha = float(alpha)
        if not 0.0 <= alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
        rows.append(LossCurveRow(
            alpha=alpha,
            loss_rgf=(D - 1) / (D + q - 1),
            loss_transfer=1.0 - alpha ** 2,
            loss_bs=theoretical_loss_bs(alpha, lambda_star(alpha ** 2, q, D), q, D),
            loss_ga=theoretical_loss_ga(alpha, mu_star(alpha, e_beta), e_beta),
        ))
    return rows


def write_loss_curves_csv(rows: Sequence[LossCurveRow], path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CURVE_HEADER)
        for row in rows:
            writer.writerow([f"{getattr(row, name):.12g}" for name in CURVE_HEADER])
    logger.info(f"✓ Wrote {len(rows)} loss-curve rows to {path}")


# Battery

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ''
    values: dict = field(default_factory=dict)


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _complement_direction(spanned: List[np.ndarray], rng: SeededRng) -> np.ndarray:
    """Random unit vector orthogonal to the given orthonormal vectors"""
    while True:
        basis = gram_schmidt(spanned + [rng.normal(spanned[0].shape[0])])
        if basis.d == len(spanned) + 1:
            return basis.matrix[-1]


def prior_with_cosine(grad: np.ndarray, alpha: float, rng: SeededRng) -> np.ndarray:
    """Unit vector whose cosine with grad is alpha"""
    unit_grad = _unit(grad)
    other = _complement_direction([unit_grad], rng)
    return alpha * unit_grad + np.sqrt(1.0 - alpha ** 2) * other


def prior_outside_subspace(grad: np.ndarray, basis: SubspaceBasis, weight: float, rng: SeededRng) -> np.ndarray:
    """
    Unit vector orthogonal to the subspace, leaning on the part of grad
    outside it with the given weight
    """
    outside = _unit(grad - basis.project(grad))
    other = _complement_direction(list(basis.matrix) + [outside], rng)
    return weight * outside + np.sqrt(1.0 - weight ** 2) * other


def _z_check(name: str, reports: List[MonteCarloReport]) -> CheckResult:
    finite = [r for r in reports if not r.degenerate]
    worst = max((abs(r.z_score) for r in finite), default=0.0)
    return CheckResult(name, worst <= Z_LIMIT, f"max |z| = {worst:.3f} over {len(finite)} configurations",
                       {'max_abs_z': worst})


def _progress(iterable, desc: str):
    return tqdm(iterable, desc=desc, leave=False, disable=not logger.isEnabledFor(logging.INFO))


def check_rgf_loss(trials: int, rng: SeededRng) -> CheckResult:
    """Uniform probes at D=12, q=3 against (D - 1)/(D + q - 1)"""
    grad = rng.normal(12)
    report = monte_carlo_loss(UniformSampler(12), grad, 3, trials, rng, closed_form=11.0 / 14.0 * float(grad @ grad))
    return _z_check('rgf_loss', [report])


def check_biased_sampling_loss(trials: int, rng: SeededRng, configs: int = 50,
                               subspace: bool = False) -> CheckResult:
    """Monte Carlo vs closed form for biased sampling in full space or a subspace"""
    reports = []
    for _ in _progress(range(configs), "Biased sampling" + (" (subspace)" if subspace else "")):
        D = int(rng.integers(5, 101))
        q = int(rng.integers(1, 21))
        lam = float(rng.uniform(0.0, 1.0))
        grad = rng.normal(D)
        closed_form = None
        if subspace:
            d = int(rng.integers(1, D - 1))
            basis = gram_schmidt(list(rng.normal((d, D))))
            prior = prior_outside_subspace(grad, basis, float(rng.uniform(0.0, 1.0)), rng)
            sampler = BiasedSubspaceSampler(prior, basis, lam)
            g_sq = float(grad @ grad)
            unit_grad = grad / np.sqrt(g_sq)
            energy = float(np.linalg.norm(basis.project(unit_grad)))
            closed_form = g_sq * theoretical_loss_bs_subspace(float(prior @ unit_grad), energy, lam, q, d)
        else:
            prior = prior_with_cosine(grad, float(rng.uniform(0.0, 1.0)), rng)
            sampler = BiasedSampler(prior, lam)
        reports.append(monte_carlo_loss(sampler, grad, q, trials, rng, closed_form=closed_form))
    return _z_check('biased_sampling_subspace_loss' if subspace else 'biased_sampling_loss', reports)


def check_gradient_averaging_loss(trials: int, rng: SeededRng, configs: int = 50,
                                  subspace: bool = False) -> CheckResult:
    """Monte Carlo vs closed form for gradient averaging"""
    reports = []
    for _ in _progress(range(configs), "Gradient averaging" + (" (subspace)" if subspace else "")):
        D = int(rng.integers(5, 101))
        q = int(rng.integers(1, 21))
        mu = float(rng.uniform(0.0, 1.0))
        grad = rng.normal(D)
        basis = None
        if subspace:
            basis = gram_schmidt(list(rng.normal((int(rng.integers(1, D)), D))))
            prior = _unit(rng.normal(D))
        else:
            prior = prior_with_cosine(grad, float(rng.uniform(0.0, 1.0)), rng)
        reports.append(monte_carlo_loss_ga(prior, grad, mu, q, trials, rng, basis))
    return _z_check('gradient_averaging_subspace_loss' if subspace else 'gradient_averaging_loss', reports)


def check_coefficient_optimality(rng: SeededRng, lambda_fn: Callable = lambda_star, configs: int = 200,
                                 grid_points: int = 100_001) -> CheckResult:
    """lambda*, subspace lambda* and mu* against dense grid searches of their objectives"""
    worst = {'lambda': 0.0, 'lambda_subspace': 0.0, 'mu': 0.0}
    for _ in _progress(range(configs), "Coefficient optimality"):
        D = int(rng.integers(2, 5001))
        q = int(rng.integers(1, 101))
        alpha_sq = float(rng.uniform(0.0, 1.0))
        lam = lambda_fn(alpha_sq, q, D)
        _, best = grid_argopt(lambda grid: bs_objective(grid, alpha_sq, q, D), 0.0, 1.0, grid_points)
        worst['lambda'] = max(worst['lambda'], best - float(bs_objective(lam, alpha_sq, q, D)))

        d = int(rng.integers(1, 1001))
        A_sq = float(rng.uniform(0.0, 1.0))
        alpha_sq_sub = float(rng.uniform(0.0, 1.0 - A_sq))
        lam_sub = lambda_star_subspace(alpha_sq_sub, A_sq, q, d)
        _, best = grid_argopt(lambda grid: bs_objective_subspace(grid, alpha_sq_sub, A_sq, q, d),
                              0.0, 1.0, grid_points)
        worst['lambda_subspace'] = max(
            worst['lambda_subspace'], best - float(bs_objective_subspace(lam_sub, alpha_sq_sub, A_sq, q, d))
        )

        alpha = float(np.sqrt(alpha_sq))
        e_beta = expected_beta(q, D)
        mu = mu_star(alpha, e_beta)
        _, lowest = grid_argopt(lambda grid: 1.0 - ga_objective(grid, alpha, e_beta), 0.0, 1.0, grid_points,
                                maximize=False)
        worst['mu'] = max(worst['mu'], theoretical_loss_ga(alpha, mu, e_beta) - lowest)
    passed = all(gap <= 1e-8 for gap in worst.values())
    detail = ', '.join(f"{name} gap {gap:.3e}" for name, gap in worst.items())
    return CheckResult('coefficient_optimality', passed, detail, worst)


def check_anchors(rng: SeededRng, lambda_fn: Callable = lambda_star, configs: int = 50) -> CheckResult:
    """Exact identities of the closed forms"""
    errors = {'lambda_at_inverse_dim': 0.0, 'rgf_loss': 0.0, 'ga_optimum': 0.0, 'bs_interior_optimum': 0.0}
    for _ in range(configs):
        D = int(rng.integers(2, 5001))
        q = int(rng.integers(2, 101))
        errors['lambda_at_inverse_dim'] = max(errors['lambda_at_inverse_dim'], abs(lambda_fn(1.0 / D, q, D) - 1.0 / D))
        alpha = float(rng.uniform(0.0, 1.0))
        errors['rgf_loss'] = max(
            errors['rgf_loss'], abs(theoretical_loss_bs(alpha, 1.0 / D, q, D) - (D - 1) / (D + q - 1))
        )
        e_beta = expected_beta(q, D)
        errors['ga_optimum'] = max(
            errors['ga_optimum'],
            abs(theoretical_loss_ga(alpha, mu_star(alpha, e_beta), e_beta) - (1.0 - ga_optimum_value(alpha, e_beta))),
        )
        span = D + 2 * q - 2
        alpha_sq = float(rng.uniform(1.0 / span, (2 * q - 1) / span))
        lam = lambda_fn(alpha_sq, q, D)
        if 0.0 < lam < 1.0:
            errors['bs_interior_optimum'] = max(
                errors['bs_interior_optimum'],
                abs(float(bs_objective(lam, alpha_sq, q, D)) - bs_interior_optimum_value(alpha_sq, q, D)),
            )
    limits = {'lambda_at_inverse_dim': 1e-12, 'rgf_loss': 1e-12, 'ga_optimum': 1e-12, 'bs_interior_optimum': 1e-10}
    passed = all(errors[name] <= limits[name] for name in errors)
    detail = ', '.join(f"{name} {err:.2e}" for name, err in errors.items())
    return CheckResult('anchors', passed, detail, errors)


def check_monotonicity(rng: SeededRng, lambda_fn: Callable = lambda_star, configs: int = 20) -> CheckResult:
    """lambda* grows with alpha^2 and shrinks with q; mu* grows with alpha and shrinks with E[beta]"""
    failures = []
    grid = np.linspace(0.0, 1.0, 1001)
    for _ in range(configs):
        D = int(rng.integers(2, 5001))
        q = int(rng.integers(1, 101))
        values = np.array([lambda_fn(a2, q, D) for a2 in grid])
        if np.any(np.diff(values) < -1e-12):
            failures.append(f"lambda* not monotone in alpha^2 at q={q}, D={D}")
        alpha_sq = float(rng.uniform(1.0 / D, 1.0))
        by_q = np.array([lambda_fn(alpha_sq, k, D) for k in range(1, 101)])
        if np.any(np.diff(by_q) > 1e-12):
            failures.append(f"lambda* not monotone in q at alpha^2={alpha_sq:.4f}, D={D}")
    alphas = np.linspace(0.0, 1.0, 1001)
    betas = np.linspace(0.001, 0.999, 999)
    for e_beta in (0.05, 0.3, 0.7):
        if np.any(np.diff([mu_star(a, e_beta) for a in alphas]) < -1e-12):
            failures.append(f"mu* not monotone in alpha at E[beta]={e_beta}")
    for alpha in (0.1, 0.5, 0.9):
        if np.any(np.diff([mu_star(alpha, b) for b in betas]) > 1e-12):
            failures.append(f"mu* not monotone in E[beta] at alpha={alpha}")
    return CheckResult('monotonicity', not failures, '; '.join(failures) or 'all monotone')


def check_dominance(rng: SeededRng, lambda_fn: Callable = lambda_star, configs: int = 20) -> CheckResult:
    """Optimal coefficients never lose to the endpoints of their families"""
    worst = 0.0
    for _ in range(configs):
        D = int(rng.integers(2, 5001))
        q = int(rng.integers(1, 101))
        e_beta = expected_beta(q, D)
        for alpha in np.linspace(0.0, 1.0, 101):
            loss_bs = theoretical_loss_bs(alpha, lambda_fn(alpha ** 2, q, D), q, D)
            worst = max(worst, loss_bs - min((D - 1) / (D + q - 1), 1.0 - alpha ** 2))
            loss_ga = theoretical_loss_ga(alpha, mu_star(alpha, e_beta), e_beta)
            worst = max(worst, loss_ga - min(1.0 - e_beta ** 2, 1.0 - alpha ** 2))
    return CheckResult('dominance', worst <= 1e-12, f"largest excess {worst:.3e}", {'excess': worst})


def check_subspace_closed_forms(rng: SeededRng, configs: int = 50,
                                grid_points: int = 100_001) -> CheckResult:
    """
    Subspace closed forms against the sampler second moment, the lambda = 0
    anchor and a grid search over mu

    The prior is orthogonal to the subspace for biased sampling and in
    general position for averaging.
    """
    errors = {'bs_subspace_loss': 0.0, 'bs_subspace_anchor': 0.0, 'mu_subspace_optimum': 0.0,
              'mu_subspace_gap': 0.0}
    for _ in _progress(range(configs), "Subspace closed forms"):
        D = int(rng.integers(5, 101))
        d = int(rng.integers(1, D - 1))
        q = int(rng.integers(1, 21))
        lam = float(rng.uniform(0.0, 1.0))
        grad = rng.normal(D)
        basis = gram_schmidt(list(rng.normal((d, D))))
        g_sq = float(grad @ grad)
        unit_grad = grad / np.sqrt(g_sq)
        in_subspace = basis.project(unit_grad)
        energy = float(np.linalg.norm(in_subspace))

        prior = prior_outside_subspace(grad, basis, float(rng.uniform(0.0, 1.0)), rng)
        alpha = float(prior @ unit_grad)
        sampled = sampler_closed_form_loss(BiasedSubspaceSampler(prior, basis, lam), grad, q) / g_sq
        errors['bs_subspace_loss'] = max(
            errors['bs_subspace_loss'], abs(theoretical_loss_bs_subspace(alpha, energy, lam, q, d) - sampled)
        )
        errors['bs_subspace_anchor'] = max(
            errors['bs_subspace_anchor'],
            abs(theoretical_loss_bs_subspace(alpha, energy, 0.0, q, d) - (1.0 - energy ** 2 * q / (d + q - 1))),
        )

        # alpha >= 0 keeps the zero of the averaged cosine outside [0, 1]
        v = _unit(rng.normal(D))
        if v @ unit_grad < 0:
            v = -v
        alpha = float(v @ unit_grad)
        alpha1 = float(v @ in_subspace)
        e_beta = expected_beta_subspace(energy, q, d)
        mu = mu_star_subspace_exact(alpha, alpha1, energy, e_beta)
        reached = 1.0 - theoretical_loss_ga_subspace(alpha, alpha1, energy, mu, e_beta)
        if 0.0 < mu < 1.0:
            errors['mu_subspace_optimum'] = max(
                errors['mu_subspace_optimum'], abs(reached - f_mu_subspace_optimum(alpha, alpha1, energy, e_beta))
            )
        _, best = grid_argopt(lambda grid: ga_objective(grid, alpha, e_beta, alpha1 / energy ** 2),
                              0.0, 1.0, grid_points)
        errors['mu_subspace_gap'] = max(errors['mu_subspace_gap'], best - reached)
    limits = {'bs_subspace_loss': 1e-10, 'bs_subspace_anchor': 1e-12, 'mu_subspace_optimum': 1e-10,
              'mu_subspace_gap': 1e-8}
    passed = all(errors[name] <= limits[name] for name in errors)
    detail = ', '.join(f"{name} {err:.2e}" for name, err in errors.items())
    return CheckResult('subspace_closed_forms', passed, detail, errors)


def corrupted_lambda_star(alpha_sq: float, q: int, D: int) -> float:
    """Deliberately wrong lambda* used to check that the battery can fail"""
    return 0.5 * lambda_star(alpha_sq, q, D)


def run_verification_battery(trials: int, seed: int = 0, lambda_fn: Callable = lambda_star,
                             configs: int = 50) -> List[CheckResult]:
    """
    Run every check

    Args:
        trials: Monte Carlo trials per configuration (>= 1000)
        seed: Seed of the battery's random stream
        lambda_fn: lambda* implementation under test
        configs: Random configurations per Monte Carlo check

    Returns:
        One CheckResult per check
    """
    _check_trials(trials)
    rng = SeededRng(seed)
    checks = [
        lambda: check_rgf_loss(trials, rng.spawn(1)),
        lambda: check_biased_sampling_loss(trials, rng.spawn(2), configs),
        lambda: check_biased_sampling_loss(trials, rng.spawn(3), configs, subspace=True),
        lambda: check_gradient_averaging_loss(trials, rng.spawn(4), configs),
        lambda: check_gradient_averaging_loss(trials, rng.spawn(5), configs, subspace=True),
        lambda: check_coefficient_optimality(rng.spawn(6), lambda_fn),
        lambda: check_anchors(rng.spawn(7), lambda_fn),
        lambda: check_monotonicity(rng.spawn(8), lambda_fn),
        lambda: check_dominance(rng.spawn(9), lambda_fn),
        lambda: check_subspace_closed_forms(rng.spawn(10)),
    ]
    results = []
    for check in checks:
        result = check()
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"{'✓' if result.passed else '✗'} {result.name}: {result.detail}")
        results.append(result)
    return results
