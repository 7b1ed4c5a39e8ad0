"""
Closed-form optimal coefficients

lambda* for biased sampling, mu* for gradient averaging and the approximate
expected cosine E[beta] of a random gradient-free estimate, in full-space and
subspace variants.
"""

import numpy as np

from ..exceptions import DomainError


def _unit_interval(value: float, name: str) -> float:
    value = float(value)
    if not -1e-12 <= value <= 1.0 + 1e-12:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")
    return min(max(value, 0.0), 1.0)


def _check_q(q: int):
    if q < 1:
        raise DomainError(f"q must be >= 1, got {q}")


def expected_beta(q: int, D: int) -> float:
    """E[cos(g_rgf, grad f)] ~ sqrt(q / (D + q - 1))"""
    _check_q(q)
    if D < 2:
        raise DomainError(f"D must be >= 2, got {D}")
    return float(np.sqrt(q / (D + q - 1)))


def expected_beta_subspace(A: float, q: int, d: int) -> float:
    """E[beta] ~ A sqrt(q / (d + q - 1)) for probes inside a d-dim subspace"""
    A = _unit_interval(A, 'A')
    _check_q(q)
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    return float(A * np.sqrt(q / (d + q - 1)))


def lambda_star(alpha_sq: float, q: int, D: int) -> float:
    """
    Optimal weight of the prior direction in biased sampling

    Zero below a_l = 1/(D+2q-2), one above a_r = (2q-1)/(D+2q-2); both
    boundaries belong to the constant branches.
    """
    a2 = _unit_interval(alpha_sq, 'alpha_sq')
    _check_q(q)
    if D < 2:
        raise DomainError(f"D must be >= 2, got {D}")
    span = D + 2 * q - 2
    if a2 <= 1.0 / span:
        return 0.0
    if a2 >= (2 * q - 1) / span:
        return 1.0
    numerator = (1.0 - a2) * (a2 * span - 1.0)
    denominator = 2.0 * a2 * D * q - a2 ** 2 * D * span - 1.0
    return float(np.clip(numerator / denominator, 0.0, 1.0))


def lambda_star_subspace(alpha_sq: float, A_sq: float, q: int, d: int) -> float:
    """
    Optimal prior weight when the remaining probes live in a d-dim subspace

    A_sq is the energy of the normalized gradient inside the subspace. With no
    energy there the prior is the only signal and 1 is returned.
    """
    a2 = _unit_interval(alpha_sq, 'alpha_sq')
    e2 = _unit_interval(A_sq, 'A_sq')
    _check_q(q)
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if e2 == 0.0:
        return 1.0
    span = d + 2 * q - 2
    if a2 <= e2 / span:
        return 0.0
    if a2 >= min(1.0, e2 * (2 * q - 1) / d):
        return 1.0
    numerator = e2 * (e2 - a2 * span)
    denominator = e2 ** 2 + a2 ** 2 * d ** 2 - 2.0 * e2 * a2 * (q + d * q - 1)
    return float(np.clip(numerator / denominator, 0.0, 1.0))


def mu_star(alpha: float, e_beta: float) -> float:
    """Optimal averaging weight alpha(1-E^2) / (alpha(1-E^2) + (1-alpha^2)E)"""
    alpha = _unit_interval(alpha, 'alpha')
    if not 0.0 < e_beta < 1.0:
        raise DomainError(f"e_beta must lie in (0, 1), got {e_beta}")
    if alpha == 0.0:
        return 0.0
    numerator = alpha * (1.0 - e_beta ** 2)
    return float(numerator / (numerator + (1.0 - alpha ** 2) * e_beta))


def mu_star_subspace(alpha: float, e_beta_sub: float) -> float:
    """Approximate subspace averaging weight alpha / (alpha + E[beta])"""
    if alpha < 0 or e_beta_sub < 0:
        raise DomainError(f"alpha and e_beta must be non-negative, got {alpha}, {e_beta_sub}")
    if alpha == 0.0 and e_beta_sub == 0.0:
        return 0.0
    return float(alpha / (alpha + e_beta_sub))


def mu_star_subspace_exact(alpha: float, alpha1: float, A: float, e_beta: float) -> float:
    """
    Exact subspace averaging weight when alpha1 (the prior's cosine with the
    in-subspace gradient component) is known
    """
    a_sq = A ** 2
    denominator = (a_sq - alpha1 * e_beta) * (alpha + e_beta)
    if denominator == 0.0:
        raise DomainError("Degenerate configuration: alpha + E[beta] = 0 or A^2 = alpha1 E[beta]")
    return float(np.clip((a_sq * alpha - alpha1 * e_beta ** 2) / denominator, 0.0, 1.0))
