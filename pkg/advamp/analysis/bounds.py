"""
advamp.analysis.bounds
~~~~~~~~~~~~~~~~~~~~~~

Closed-form quantities for advantage amplification: the ε-sufficiency loss
bound and the induced Q-value error δ, the aggregation regret and
amplification bounds, the noise-rejection headroom ε_max, and the
switching-cost horizon κ with its regret bound and amplification threshold.

Every function validates its inputs and raises ``ValueError`` (or
``LambertWDomainError`` for κ) instead of returning a meaningless number.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy import optimize

from advamp.analysis.lambertw import LambertWDomainError, lambert_w

logger = logging.getLogger(__name__)


def _check_gamma(gamma: float, open_below: bool = False) -> None:
    low_ok = gamma > 0.0 if open_below else gamma >= 0.0
    if not (low_ok and gamma < 1.0):
        interval = "(0, 1)" if open_below else "[0, 1)"
        raise ValueError(f"gamma must lie in {interval}, got {gamma}")


def _check_nonnegative(**values: float) -> None:
    for name, value in values.items():
        if value < 0:
            raise ValueError(f"{name} must be nonnegative, got {value}")


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")


def eq2_loss_bound(epsilon: float, r_max: float, gamma: float) -> float:
    """Value loss of an ε-sufficient statistic: ``2εr_max/(1−γ)³``."""
    _check_gamma(gamma)
    _check_nonnegative(epsilon=epsilon, r_max=r_max)
    return 2.0 * epsilon * r_max / (1.0 - gamma) ** 3


def eq4_delta(epsilon: float, r_max: float, gamma: float) -> float:
    """Q-value error induced by an ε-sufficient statistic: ``εr_max/(1−γ)²``."""
    _check_gamma(gamma)
    _check_nonnegative(epsilon=epsilon, r_max=r_max)
    return epsilon * r_max / (1.0 - gamma) ** 2


def thm1_bound(k: int, L: float, gamma: float) -> float:
    """Value gap between event-level and k-aggregate optimal policies: ``2kL/(1−γ)``."""
    _check_k(k)
    _check_gamma(gamma)
    _check_nonnegative(L=L)
    return 2.0 * k * L / (1.0 - gamma)


def _compounding_penalty(k: int, L: float, gamma: float) -> float:
    # 2γL(1 − (1 + k − γk)γ^k)/(1−γ)²
    drift = 1.0 - (1.0 + k - gamma * k) * gamma**k
    return 2.0 * gamma * L * drift / (1.0 - gamma) ** 2


def _check_amplification_inputs(A: float, k: int, L: float, gamma: float) -> None:
    _check_k(k)
    _check_gamma(gamma)
    _check_nonnegative(A=A, L=L)
    if A < 2.0 * k * L:
        raise ValueError(
            f"advantage {A} is below 2kL = {2.0 * k * L}; the bound does not apply"
        )


def lemma3_lower(A: float, k: int, L: float, gamma: float) -> float:
    """
    Lower bound on the aggregated advantage when the optimal action persists.

    ``A(1−γ^k)/(1−γ) − 2γL(1 − (1+k−γk)γ^k)/(1−γ)²``, valid for ``A ≥ 2kL``.
    """
    _check_amplification_inputs(A, k, L, gamma)
    return A * (1.0 - gamma**k) / (1.0 - gamma) - _compounding_penalty(k, L, gamma)


def thm2_lower(A: float, k: int, L: float, gamma: float) -> float:
    """
    Lower bound on the k-aggregate optimal advantage.

    ``A(1−γ^k)/(1−γ) − 2L(γ − (1+k−γk)γ^{k+1})/(1−γ)² − 2kL/(1−γ)``, valid
    for ``A ≥ 2kL``.
    """
    _check_amplification_inputs(A, k, L, gamma)
    compounded = A * (1.0 - gamma**k) / (1.0 - gamma)
    weighted = gamma - (1.0 + k - gamma * k) * gamma ** (k + 1)
    drift = 2.0 * L * weighted / (1.0 - gamma) ** 2
    return compounded - drift - 2.0 * k * L / (1.0 - gamma)


def eps_max_raw(k: int, L: float, gamma: float, r_max: float) -> float:
    """Unclamped ``L(k(γ−γ^k) − γ(1−(1+k−γk)γ^k))/r_max``; negative for k=1."""
    _check_k(k)
    _check_gamma(gamma)
    _check_nonnegative(L=L)
    if not r_max > 0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    headroom = k * (gamma - gamma**k) - gamma * (1.0 - (1.0 + k - gamma * k) * gamma**k)
    return L * headroom / r_max


def eps_max(k: int, L: float, gamma: float, r_max: float) -> float:
    """Largest sufficiency error ε that k-aggregation can reject (never negative)."""
    return max(0.0, eps_max_raw(k, L, gamma, r_max))


def _check_switch_inputs(gamma: float, L: float, T: float) -> None:
    _check_gamma(gamma, open_below=True)
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    _check_nonnegative(T=T)


def kappa_limit(gamma: float, L: float) -> float:
    """Supremum ``2γL/(1−γ)²`` of the worst-case regret; κ exists only for T below it."""
    return 2.0 * gamma * L / (1.0 - gamma) ** 2


def kappa_argument(gamma: float, L: float, T: float) -> float:
    """Argument of the Lambert W function in the closed form of κ."""
    _check_switch_inputs(gamma, L, T)
    log_gamma = math.log(gamma)
    scaled = (1.0 - gamma) ** 2 * T / (2.0 * gamma * L) - 1.0
    return gamma ** (1.0 / (1.0 - gamma)) / (gamma - 1.0) * scaled * log_gamma


def kappa(gamma: float, L: float, T: float) -> float:
    """
    Horizon after which the worst-case regret of holding an action reaches T.

    ``κ = [log γ + (γ−1)·W(arg)] / ((γ−1)·log γ)``. The nonnegative root of the
    defining equation lies on the lower branch ``W₋₁``; the principal branch
    gives the negative root. Call sites needing an integer use ``kappa_ceiling``.

    Raises:
        LambertWDomainError: If ``T ≥ 2γL/(1−γ)²`` (the regret never reaches T)
    """
    argument = kappa_argument(gamma, L, T)
    if argument >= 0.0:
        raise LambertWDomainError(
            f"switching cost T={T} is at or above the regret supremum "
            f"2γL/(1−γ)²={kappa_limit(gamma, L):.6g}; kappa is unbounded"
        )
    log_gamma = math.log(gamma)
    w = lambert_w(argument, branch=-1)
    value = (log_gamma + (gamma - 1.0) * w) / ((gamma - 1.0) * log_gamma)
    # W is exact only up to rounding; T=0 must map to 0
    return max(0.0, value)


def kappa_ceiling(gamma: float, L: float, T: float) -> int:
    """Integer horizon ``⌈κ⌉``."""
    return int(math.ceil(kappa(gamma, L, T) - 1e-12))


def kappa_root_residual(k: float, gamma: float, L: float, T: float) -> float:
    """``2γL(1 + kγ^{k+1} − (1+k)γ^k)/(1−γ)² − T``, zero at κ."""
    regret = (
        2.0 * gamma * L * (1.0 + k * gamma ** (k + 1) - (1.0 + k) * gamma**k)
        / (1.0 - gamma) ** 2
    )
    return regret - T


def kappa_bisection(gamma: float, L: float, T: float, xtol: float = 1e-12) -> float:
    """
    Root of the defining equation of κ by bisection.

    Raises:
        LambertWDomainError: If no finite root exists
    """
    _check_switch_inputs(gamma, L, T)
    if T >= kappa_limit(gamma, L):
        raise LambertWDomainError(
            f"switching cost T={T} has no finite kappa for gamma={gamma}, L={L}"
        )
    if T == 0.0:
        return 0.0
    high = 1.0
    while kappa_root_residual(high, gamma, L, T) < 0.0:
        high *= 2.0
    return float(
        optimize.bisect(kappa_root_residual, 0.0, high, args=(gamma, L, T), xtol=xtol)
    )


def thm3_regret(gamma: float, L: float, T: float) -> float:
    """Regret bound of the optimal switching-cost policy: ``2κL/(1−γ)``."""
    if L == 0.0:
        _check_gamma(gamma, open_below=True)
        return 0.0
    return 2.0 * kappa(gamma, L, T) * L / (1.0 - gamma)


def thm4_threshold(gamma: float, L: float, T: float) -> float:
    """Event-level advantage ``(1 + 1/(1−γ))·2κL`` guaranteeing extended advantage 2T."""
    if L == 0.0:
        _check_gamma(gamma, open_below=True)
        return 0.0
    return (1.0 + 1.0 / (1.0 - gamma)) * 2.0 * kappa(gamma, L, T) * L


def regime_loss_bound(sigma: float, gamma: float) -> float:
    """Compounded loss ``σ/(1−γ)`` of a policy that errs only at small-advantage states."""
    _check_gamma(gamma)
    _check_nonnegative(sigma=sigma)
    return sigma / (1.0 - gamma)


def snr_regime(
    gaps: Sequence[float], delta: float, sigma: Optional[float] = None
) -> str:
    """
    Classify an advantage profile against the estimation error ``δ``.

    Returns:
        ``"benign"`` if every advantage is at least 2δ, ``"saturated"`` if
        every advantage is below 2δ, ``"separated"`` if each advantage is
        either at most ``sigma`` or at least 2δ, otherwise ``"mixed"``
    """
    gaps = np.asarray(gaps, dtype=float)
    _check_nonnegative(delta=delta)
    large = gaps >= 2.0 * delta
    if np.all(large):
        return "benign"
    if not np.any(large):
        return "saturated"
    if sigma is not None and np.all(large | (gaps <= sigma)):
        return "separated"
    return "mixed"


def noise_rejection_profile(
    k_values: Sequence[int], L: float, gamma: float, r_max: float
) -> List[Dict[str, float]]:
    """Tabulate ε_max against the aggregation loss ``2kL/(1−γ)`` for each k."""
    return [
        {
            "k": int(k),
            "eps_max": eps_max(k, L, gamma, r_max),
            "aggregation_loss": thm1_bound(k, L, gamma),
        }
        for k in k_values
    ]


class BoundInputs(BaseModel):
    """Inputs shared by every closed-form bound."""

    gamma: float = Field(..., gt=0.0, lt=1.0)
    L: float = Field(..., ge=0.0)
    k: int = Field(1, ge=1)
    T: float = Field(0.0, ge=0.0)
    r_max: float = Field(1.0, gt=0.0)
    epsilon: float = Field(0.0, ge=0.0)
    A: float = Field(0.0, ge=0.0)
    sigma: float = Field(0.0, ge=0.0)

    @field_validator("gamma", "L", "T", "r_max", "epsilon", "A", "sigma")
    @classmethod
    def validate_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("bound inputs must be finite")
        return v


def all_bounds(inputs: BoundInputs) -> Dict[str, object]:
    """
    Evaluate every closed-form quantity for ``inputs``.

    Quantities whose preconditions fail are reported under ``errors`` with
    the exception text instead of a value. ``snr_regime`` classifies the
    advantage ``A`` against the Q-value error induced by ``epsilon``;
    ``noise_rejection_profile`` tabulates every horizon from 1 to ``k``.
    """
    g, L, k, T = inputs.gamma, inputs.L, inputs.k, inputs.T
    r_max = inputs.r_max
    calculators = {
        "eq2_loss_bound": lambda: eq2_loss_bound(inputs.epsilon, r_max, g),
        "eq4_delta": lambda: eq4_delta(inputs.epsilon, r_max, g),
        "thm1_bound": lambda: thm1_bound(k, L, g),
        "lemma3_lower": lambda: lemma3_lower(inputs.A, k, L, g),
        "thm2_lower": lambda: thm2_lower(inputs.A, k, L, g),
        "eps_max_raw": lambda: eps_max_raw(k, L, g, r_max),
        "eps_max": lambda: eps_max(k, L, g, r_max),
        "noise_rejection_profile": lambda: noise_rejection_profile(
            range(1, k + 1), L, g, r_max
        ),
        "regime_loss_bound": lambda: regime_loss_bound(inputs.sigma, g),
        "snr_regime": lambda: snr_regime(
            [inputs.A], eq4_delta(inputs.epsilon, r_max, g), inputs.sigma
        ),
        "kappa_limit": lambda: kappa_limit(g, L),
        "kappa": lambda: kappa(g, L, T),
        "kappa_ceiling": lambda: kappa_ceiling(g, L, T),
        "kappa_bisection": lambda: kappa_bisection(g, L, T),
        "thm3_regret": lambda: thm3_regret(g, L, T),
        "thm4_threshold": lambda: thm4_threshold(g, L, T),
    }
    result: Dict[str, object] = {"inputs": inputs.model_dump()}
    errors: Dict[str, str] = {}
    for name, calculator in calculators.items():
        try:
            result[name] = calculator()
        except ValueError as e:
            logger.debug(f"{name} not available: {e}")
            result[name] = None
            errors[name] = str(e)
    result["errors"] = errors
    return result
