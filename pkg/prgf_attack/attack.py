"""
PGD attack driver

Untargeted score-based attack: starting from a correctly classified point,
repeatedly step along the normalized gradient estimate and project back onto
the epsilon-ball (and the input box), until the predicted label changes or the
next iteration no longer fits into the query budget.

Per-iteration query layout: prior projection (M, subspace-projection priors
only), norm refresh (S every P iterations, plus S for the subspace energy),
1 alpha query, q probes, 2 projection queries (gradient averaging), and the
loss query at the new point, which doubles as the success check.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .estimators import EstimatorConfig, GaImpl, Variant, estimate_gradient
from .exceptions import (
    BudgetExceededError,
    DegeneratePriorError,
    DomainError,
    ProtocolError,
    ShapeError,
    TransportError,
)
from .geometry import SeededRng
from .oracles.base import Oracle, OracleBackend, Phase, QueryLedger
from .oracles.models import LossKind
from .scalar_estimation import NormCache, ScalarState

logger = logging.getLogger('prgf.attack')


class NormKind(str, Enum):
    L2 = 'l2'
    LINF = 'linf'


@dataclass(frozen=True)
class AttackConfig:
    norm: NormKind
    epsilon: float
    eta: float
    max_queries: int = 10000
    box: Optional[Tuple[float, float]] = None
    norm_refresh_period: int = 10
    norm_probes: int = 10

    def __post_init__(self):
        object.__setattr__(self, 'norm', NormKind(self.norm))
        if not self.epsilon > 0 or not self.eta > 0:
            raise DomainError(f"epsilon and eta must be positive, got {self.epsilon}, {self.eta}")
        if self.max_queries < 1:
            raise DomainError(f"max_queries must be >= 1, got {self.max_queries}")
        if self.box is not None and not self.box[0] < self.box[1]:
            raise DomainError(f"Box bounds must satisfy lo < hi, got {self.box}")
        if self.norm_refresh_period < 1 or self.norm_probes < 1:
            raise DomainError("Norm refresh period and probe count must be >= 1")


@dataclass
class AttackOutcome:
    success: bool
    queries: int
    iterations: int
    final_perturbation_norm: float
    adversarial_point: Optional[np.ndarray] = None
    aborted: bool = False
    error: Optional[str] = None
    prior_returned_iterations: int = 0
    phase_queries: Dict[str, int] = field(default_factory=dict)
    trace: List[dict] = field(default_factory=list)


def normalize_step(g: np.ndarray, norm: NormKind) -> np.ndarray:
    """Steepest-ascent direction of unit l_p norm (zero stays zero)"""
    g = np.asarray(g, dtype=np.float64)
    if NormKind(norm) is NormKind.LINF:
        return np.sign(g)
    length = float(np.linalg.norm(g))
    return g / length if length > 0 else np.zeros_like(g)


def perturbation_norm(delta: np.ndarray, norm: NormKind) -> float:
    if NormKind(norm) is NormKind.LINF:
        return float(np.max(np.abs(delta))) if delta.size else 0.0
    return float(np.linalg.norm(delta))


def project_ball(x: np.ndarray, x0: np.ndarray, epsilon: float, norm: NormKind,
                 box: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Project onto the epsilon-ball around x0, then clip to the box"""
    x = np.asarray(x, dtype=np.float64)
    delta = x - x0
    if NormKind(norm) is NormKind.LINF:
        delta = np.clip(delta, -epsilon, epsilon)
    else:
        length = float(np.linalg.norm(delta))
        if length > epsilon:
            delta = delta * (epsilon / length)
    projected = x0 + delta
    if box is not None:
        projected = np.clip(projected, box[0], box[1])
    return projected


def iteration_cost(est_cfg: EstimatorConfig, prior_source, scalars: ScalarState) -> int:
    """Worst-case queries of the next iteration, including the post-step loss query"""
    cost = est_cfg.q + 1
    if est_cfg.variant is Variant.RGF or prior_source is None:
        return cost
    cost += prior_source.query_cost
    if not est_cfg.uses_fixed_coefficient:
        cost += 1 + scalars.refresh_cost(est_cfg.dd_basis is not None)
        if est_cfg.variant is Variant.PRGF_GA and est_cfg.ga_impl is GaImpl.PROJECTION:
            cost += 2
    return cost


def _cosine(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    denominator = float(np.linalg.norm(a) * np.linalg.norm(b))
    return float(a @ b) / denominator if denominator > 0 else None


def run_attack(backend: OracleBackend, prior_source, x0: np.ndarray, y: int, attack_cfg: AttackConfig,
               est_cfg: EstimatorConfig, rng: SeededRng, trace: bool = False) -> AttackOutcome:
    """
    Attack one instance

    Args:
        backend: Target oracle backend (shared, never mutated)
        prior_source: SurrogatePrior or None (plain RGF)
        x0: Clean input, classified as y
        attack_cfg: Threat model and budget
        est_cfg: Gradient estimator settings
        rng: Stream private to this instance
        trace: Record per-iteration gradient quality and the constraints of
            each new iterate (needs a differentiable backend)

    Returns:
        AttackOutcome; queries always equals the instance ledger total
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (backend.dim,):
        raise ShapeError(f"Expected a point of dim {backend.dim}, got shape {x0.shape}")
    box = attack_cfg.box
    if box is not None and (np.any(x0 < box[0]) or np.any(x0 > box[1])):
        raise DomainError("The clean input lies outside the box")
    if trace and not hasattr(backend, 'gradient'):
        raise DomainError("Tracing needs a backend exposing gradients")

    ledger = QueryLedger()
    oracle = Oracle(backend, ledger, budget=attack_cfg.max_queries)
    x = x0.copy()
    iterations = 0
    prior_returned = 0
    records: List[dict] = []
    use_prior = est_cfg.variant is not Variant.RGF and prior_source is not None

    def outcome(success: bool, error: Optional[str] = None) -> AttackOutcome:
        return AttackOutcome(
            success=success,
            queries=ledger.total,
            iterations=iterations,
            final_perturbation_norm=perturbation_norm(x - x0, attack_cfg.norm),
            adversarial_point=x.copy() if success else None,
            aborted=error is not None,
            error=error,
            prior_returned_iterations=prior_returned,
            phase_queries=ledger.snapshot(),
            trace=records,
        )

    try:
        first = oracle.query_loss(x0, y, Phase.ATTACK_STEP)
        if first.predicted_label != y:
            logger.debug("Clean input already misclassified")
            return outcome(True)

        scalars = ScalarState(
            NormCache(period=attack_cfg.norm_refresh_period, probes=attack_cfg.norm_probes, sigma=est_cfg.sigma),
            baseline_loss=first.loss,
        )
        while True:
            if ledger.total + iteration_cost(est_cfg, prior_source, scalars) > attack_cfg.max_queries:
                logger.debug(f"Stopping after {iterations} iterations: budget left {attack_cfg.max_queries - ledger.total}")
                return outcome(False)

            prior = None
            if use_prior:
                try:
                    prior = prior_source.build(oracle, x, y, est_cfg.sigma, scalars.baseline_loss)
                except DegeneratePriorError as e:
                    logger.warning(f"Degenerate prior at iteration {iterations} ({e}), using RGF")
            estimate = estimate_gradient(
                oracle, x, y, prior.direction if prior is not None else None, est_cfg, scalars, rng
            )
            if use_prior and prior is None:
                estimate.coefficient = 0.0
            prior_returned += int(estimate.prior_returned)

            record = None
            if trace:
                true_grad = backend.gradient(x, y)
                record = {
                    'iteration': iterations,
                    'loss': scalars.baseline_loss,
                    'queries': ledger.total,
                    'coefficient': estimate.coefficient,
                    'alpha_estimate': estimate.alpha,
                    'alpha_true': _cosine(prior.direction.data, true_grad) if prior is not None else None,
                    'cosine': _cosine(estimate.direction, true_grad),
                    'prior_returned': estimate.prior_returned,
                }

            x = project_ball(x + attack_cfg.eta * normalize_step(estimate.direction, attack_cfg.norm),
                             x0, attack_cfg.epsilon, attack_cfg.norm, box)
            response = oracle.query_loss(x, y, Phase.ATTACK_STEP)
            iterations += 1
            scalars.baseline_loss = response.loss
            scalars.norm.tick()
            if record is not None:
                record['next_loss'] = response.loss
                record['perturbation_norm'] = perturbation_norm(x - x0, attack_cfg.norm)
                record['within_box'] = box is None or bool(np.all((x >= box[0]) & (x <= box[1])))
                records.append(record)
            logger.debug(
                f"Iteration {iterations}: loss {response.loss:.6g}, coefficient {estimate.coefficient:.4f}, "
                f"queries {ledger.total}"
            )
            if response.predicted_label != y:
                return outcome(True)

    except (TransportError, ProtocolError, BudgetExceededError) as e:
        logger.warning(f"Attack aborted after {ledger.total} queries: {e}")
        return outcome(False, str(e))


def evaluate_suite(backend: OracleBackend, prior_source, dataset: Sequence[Tuple[np.ndarray, int]],
                   attack_cfg: AttackConfig, est_cfg: EstimatorConfig, seed: int = 0, jobs: int = 1,
                   show_progress: bool = False) -> List[AttackOutcome]:
    """
    Attack every instance of a dataset

    Instance i uses the random stream (seed, i), so results do not depend on
    the number of jobs. Failures are recorded as aborted outcomes.
    """
    instances = list(dataset)
    if not instances:
        return []
    outcomes: List[Optional[AttackOutcome]] = [None] * len(instances)
    base_rng = SeededRng(seed)

    def attack_instance(index: int) -> AttackOutcome:
        x0, y = instances[index]
        return run_attack(backend, prior_source, x0, int(y), attack_cfg, est_cfg, base_rng.spawn(index))

    logger.info(f"Attacking {len(instances)} instances with {est_cfg.variant.value} ({jobs} workers)")
    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as executor:
        futures = {executor.submit(attack_instance, index): index for index in range(len(instances))}
        with tqdm(total=len(instances), desc="🎯 Attacking", unit="instance", disable=not show_progress) as pbar:
            for future in as_completed(futures):
                index = futures[future]
                try:
                    outcomes[index] = future.result()
                except Exception as exc:
                    logger.error(f"Instance {index} failed: {exc}", exc_info=True)
                    outcomes[index] = AttackOutcome(
                        success=False, queries=0, iterations=0, final_perturbation_norm=0.0,
                        aborted=True, error=str(exc),
                    )
                finally:
                    pbar.update(1)

    successes = sum(1 for o in outcomes if o.success)
    logger.info(f"✓ {successes}/{len(instances)} attacks succeeded")
    return outcomes


# Presets

PRESETS = ('imagenet-l2', 'imagenet-linf', 'cifar-l2', 'cifar-linf', 'desk-l2', 'desk-linf')


@dataclass(frozen=True)
class Preset:
    attack: AttackConfig
    q: int
    sigma: float
    loss: LossKind


def attack_preset(name: str, dim: int, max_queries: int = 10000) -> Preset:
    """
    Threat model and estimator defaults for an input dimension

    Image presets clip to [0, 1]; the desk presets target the synthetic blobs.
    """
    root = float(np.sqrt(dim))
    if name == 'imagenet-l2':
        return Preset(AttackConfig(NormKind.L2, float(np.sqrt(0.001 * dim)), 2.0, max_queries, (0.0, 1.0)),
                      50, 1e-4 * root, LossKind.CROSS_ENTROPY)
    if name == 'imagenet-linf':
        return Preset(AttackConfig(NormKind.LINF, 0.05, 0.005, max_queries, (0.0, 1.0)),
                      50, 1e-4 * root, LossKind.CROSS_ENTROPY)
    if name == 'cifar-l2':
        return Preset(AttackConfig(NormKind.L2, 1.0, 0.25, max_queries, (0.0, 1.0)),
                      50, 1e-3 * root, LossKind.CW_MARGIN)
    if name == 'cifar-linf':
        return Preset(AttackConfig(NormKind.LINF, 8.0 / 255.0, 2.0 / 255.0, max_queries, (0.0, 1.0)),
                      50, 1e-3 * root, LossKind.CW_MARGIN)
    if name == 'desk-l2':
        return Preset(AttackConfig(NormKind.L2, 2.0, 0.2, max_queries),
                      10, 1e-4 * root, LossKind.CW_MARGIN)
    if name == 'desk-linf':
        return Preset(AttackConfig(NormKind.LINF, 0.3, 0.03, max_queries),
                      10, 1e-4 * root, LossKind.CW_MARGIN)
    raise DomainError(f"Unknown preset: {name}. Supported: {', '.join(PRESETS)}")
