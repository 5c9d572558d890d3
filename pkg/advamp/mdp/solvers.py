"""
Exact solvers and diagnostics for tabular MDPs.

Value iteration and iterative policy evaluation share one stopping rule: stop
once the contraction bound ``γ·Δ/(1−γ)`` on the distance to the fixed point
falls below ``tol``. The returned table is then within ``tol`` of the exact
fixed point and its one-backup residual is at most ``tol·(1−γ)``.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from advamp import settings
from advamp.mdp.models import AdvantageProfile, DeterministicPolicy, FiniteMDP, QTable

logger = logging.getLogger(__name__)


def _check_tol(tol: float) -> None:
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")


def bellman_optimality_backup(mdp: FiniteMDP, q: np.ndarray) -> np.ndarray:
    """One application of the Bellman optimality operator to a raw table."""
    return mdp.reward + mdp.discount * mdp.transition @ q.max(axis=1)


def policy_backup(
    mdp: FiniteMDP, policy: DeterministicPolicy, q: np.ndarray
) -> np.ndarray:
    """One application of the policy-evaluation operator to a raw table."""
    on_policy = q[np.arange(mdp.n_states), policy.action_of]
    return mdp.reward + mdp.discount * mdp.transition @ on_policy


def _iterate_to_fixpoint(mdp: FiniteMDP, backup, tol: float) -> np.ndarray:
    gamma = mdp.discount
    q = np.zeros((mdp.n_states, mdp.n_actions))
    if gamma == 0.0:
        return backup(q)
    iterations = 0
    while True:
        q_next = backup(q)
        iterations += 1
        delta = float(np.max(np.abs(q_next - q)))
        q = q_next
        if gamma * delta / (1.0 - gamma) <= tol:
            break
    logger.debug(
        f"Fixed point reached after {iterations} backups "
        f"({mdp.n_states} states, gamma={gamma})"
    )
    return q


def solve_q_star(mdp: FiniteMDP, tol: float = settings.SOLVER_TOL) -> QTable:
    """
    Compute the optimal Q-function by value iteration.

    Args:
        mdp: The MDP to solve
        tol: Max-norm tolerance on the distance to Q*

    Returns:
        QTable within ``tol`` of Q*
    """
    _check_tol(tol)
    values = _iterate_to_fixpoint(
        mdp, lambda q: bellman_optimality_backup(mdp, q), tol
    )
    return QTable(values=values)


def policy_q(
    mdp: FiniteMDP, policy: DeterministicPolicy, tol: float = settings.SOLVER_TOL
) -> QTable:
    """
    Evaluate ``Q^π`` for a deterministic policy by iterative backups.

    Args:
        mdp: The MDP
        policy: Policy defined over every state of ``mdp``
        tol: Max-norm tolerance on the distance to Q^π

    Returns:
        QTable within ``tol`` of Q^π
    """
    _check_tol(tol)
    if policy.n_states != mdp.n_states or policy.n_actions != mdp.n_actions:
        raise ValueError(
            f"policy over ({policy.n_states}, {policy.n_actions}) does not match "
            f"MDP ({mdp.n_states}, {mdp.n_actions})"
        )
    values = _iterate_to_fixpoint(mdp, lambda q: policy_backup(mdp, policy, q), tol)
    return QTable(values=values)


def greedy(q: QTable) -> DeterministicPolicy:
    """Greedy policy of a Q-table; ties go to the lowest action index."""
    # np.argmax returns the first maximal index
    return DeterministicPolicy(
        action_of=np.argmax(q.values, axis=1), n_actions=q.n_actions
    )


def advantages(q: QTable) -> AdvantageProfile:
    """
    Per-state gap between the best and second-best Q-value.

    Raises:
        ValueError: If the table has fewer than two actions
    """
    if q.n_actions < 2:
        raise ValueError("advantages need at least two actions")
    values = q.values
    rows = np.arange(q.n_states)
    best = np.argmax(values, axis=1)
    masked = values.copy()
    masked[rows, best] = -np.inf
    second = np.argmax(masked, axis=1)
    gap = values[rows, best] - values[rows, second]
    return AdvantageProfile(best_action=best, second_action=second, advantage=gap)


def smoothness(mdp: FiniteMDP, q: QTable) -> float:
    """
    Empirical smoothness constant of ``q`` on ``mdp``.

    The maximum of ``|q(s, a'') − q(s', a'')|`` over every positive-probability
    transition ``s → s'`` (under any action) and every action ``a''``.
    """
    q.check_matches(mdp)
    reachable = np.any(mdp.transition > 0, axis=1)
    # (S, S') matrix of the largest per-action difference
    gaps = np.max(np.abs(q.values[:, None, :] - q.values[None, :, :]), axis=2)
    return float(np.max(gaps[reachable]))


def snr(q: QTable, epsilon: float, r_max: float, gamma: float) -> float:
    """
    Signal-to-noise ratio of an advantage profile.

    Largest advantage divided by the largest advantage not exceeding
    ``2·ε·r_max/(1−γ)²``, minus one. An empty or zero denominator gives ``inf``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    gaps = advantages(q).advantage
    threshold = 2.0 * epsilon * r_max / (1.0 - gamma) ** 2
    small = gaps[gaps <= threshold]
    if small.size == 0 or float(small.max()) == 0.0:
        return float("inf")
    return float(gaps.max() / small.max() - 1.0)


def state_distribution_trajectory(
    mdp: FiniteMDP, policy: DeterministicPolicy, start: int, horizon: int
) -> np.ndarray:
    """
    Exact state distributions ``d_0, …, d_{horizon−1}`` under ``policy``.

    Returns:
        Array of shape ``(horizon, S)`` whose row ``i`` is the distribution of
        the state after ``i`` steps from ``start``
    """
    kernel = mdp.transition[np.arange(mdp.n_states), policy.action_of]
    distributions = np.empty((horizon, mdp.n_states))
    d = np.zeros(mdp.n_states)
    d[start] = 1.0
    for i in range(horizon):
        distributions[i] = d
        d = d @ kernel
    return distributions


def _tail_horizon(gamma: float, scale: float, tol: float) -> int:
    # smallest h with gamma**h * scale <= tol
    if gamma == 0.0 or scale <= tol:
        return 1
    return max(1, int(np.ceil(np.log(tol / scale) / np.log(gamma))))


def counterfactual_horizon(mdp: FiniteMDP, tol: float) -> int:
    """Smallest horizon with ``γ^h · r_max/(1−γ) ≤ tol``."""
    return _tail_horizon(mdp.discount, mdp.r_max / (1.0 - mdp.discount), tol)


def counterfactual_gap(
    mdp: FiniteMDP,
    pi: DeterministicPolicy,
    rho: DeterministicPolicy,
    b: int,
    horizon: Optional[int] = None,
    tol: float = settings.SOLVER_TOL,
) -> Tuple[float, float]:
    """
    Both sides of the counterfactual Q-value identity at state ``b``.

    ``lhs = V^π(b) − V^ρ(b)``; ``rhs`` is the discounted expectation, along
    trajectories of ``ρ``, of ``Q^π(b_i, π(b_i)) − Q^π(b_i, ρ(b_i))``, computed
    by propagating the exact state distribution for ``horizon`` steps.
    Both sides agree within ``2·tol``.

    Returns:
        Tuple of (lhs, rhs)

    Raises:
        ValueError: If ``horizon`` is shorter than ``counterfactual_horizon``
    """
    gamma = mdp.discount
    if horizon is None:
        # per-step regret is bounded by 2·r_max/(1−γ)
        horizon = _tail_horizon(gamma, 2.0 * mdp.r_max / (1.0 - gamma) ** 2, tol)
    elif horizon < counterfactual_horizon(mdp, tol):
        raise ValueError(
            f"horizon {horizon} too short for tol {tol}; need at least "
            f"{counterfactual_horizon(mdp, tol)}"
        )

    inner_tol = tol * (1.0 - gamma) / 4.0
    q_pi = policy_q(mdp, pi, inner_tol).values
    q_rho = policy_q(mdp, rho, inner_tol).values
    rows = np.arange(mdp.n_states)
    lhs = float(q_pi[b, pi.action_of[b]] - q_rho[b, rho.action_of[b]])

    regret = q_pi[rows, pi.action_of] - q_pi[rows, rho.action_of]
    distributions = state_distribution_trajectory(mdp, rho, b, horizon)
    weights = gamma ** np.arange(horizon)
    rhs = float(weights @ (distributions @ regret))
    return lhs, rhs
