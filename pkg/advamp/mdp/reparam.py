"""
Exact reparameterizations of explicit MDPs.

``aggregate_mdp`` builds the problem in which every action is executed k
times in a row; ``switching_cost_mdp`` builds the problem on the extended
state space (state, previous action) with a penalty on every action change.
Both are the ground-truth oracles for the trajectory-level wrappers in
``advamp.learning.temporal``.
"""

import logging
from typing import NamedTuple

import numpy as np

from advamp.mdp.models import FiniteMDP, QTable

logger = logging.getLogger(__name__)


def aggregate_mdp(mdp: FiniteMDP, k: int) -> FiniteMDP:
    """
    Reparameterize ``mdp`` so that each action is repeated ``k`` times.

    The aggregated transition is the k-step kernel under the repeated action,
    the aggregated reward is ``E[Σ_{i<k} γ^i r_i]`` and the discount is ``γ^k``.

    Args:
        mdp: Event-level MDP
        k: Repetition horizon, at least 1

    Returns:
        The aggregated FiniteMDP over the same states

    Raises:
        ValueError: If ``k < 1``
    """
    if k < 1:
        raise ValueError(f"aggregation horizon must be at least 1, got {k}")
    gamma = mdp.discount
    transition = np.empty_like(mdp.transition)
    reward = np.empty_like(mdp.reward)
    for a in range(mdp.n_actions):
        kernel = mdp.transition[:, a, :]
        power = np.eye(mdp.n_states)
        total = np.zeros(mdp.n_states)
        for i in range(k):
            total += gamma**i * (power @ mdp.reward[:, a])
            power = power @ kernel
        transition[:, a, :] = power
        reward[:, a] = total
    logger.debug(f"Aggregated {mdp.n_states}-state MDP with k={k}")
    return FiniteMDP(transition=transition, reward=reward, discount=gamma**k)


def repetition_q(mdp: FiniteMDP, q_star: QTable, k: int) -> QTable:
    """
    Q-value of repeating each action ``k`` times, then acting optimally.

    Equals ``Q*(b, a)`` wherever ``a`` stays optimal along every k-step
    continuation from ``b``.
    """
    q_star.check_matches(mdp)
    aggregated = aggregate_mdp(mdp, k)
    values = aggregated.reward + aggregated.discount * (
        aggregated.transition @ q_star.state_values()
    )
    return QTable(values=values)


def persistent_optimal_states(mdp: FiniteMDP, q_star: QTable, k: int) -> np.ndarray:
    """
    Mask of states whose greedy action is unchanged on every state reachable
    within ``k − 1`` steps while repeating it.
    """
    best = np.argmax(q_star.values, axis=1)
    mask = np.zeros(mdp.n_states, dtype=bool)
    for b in range(mdp.n_states):
        a = best[b]
        kernel = mdp.transition[:, a, :]
        frontier = np.zeros(mdp.n_states, dtype=bool)
        frontier[b] = True
        reached = frontier.copy()
        for _ in range(k - 1):
            frontier = (frontier.astype(float) @ kernel) > 0
            reached |= frontier
        mask[b] = bool(np.all(best[reached] == a))
    return mask


def extended_index(state, prev_action, n_actions: int):
    """Index of ``(state, prev_action)`` in the extended state space."""
    return state * n_actions + prev_action


class SwitchingCostMDP(NamedTuple):
    """Extended MDP plus the maps between extended and base states."""

    mdp: FiniteMDP
    base_state: np.ndarray
    prev_action: np.ndarray
    penalty: float

    def index(self, state, prev_action):
        return extended_index(state, prev_action, self.mdp.n_actions)


def switching_cost_mdp(mdp: FiniteMDP, T: float) -> SwitchingCostMDP:
    """
    Extend ``mdp`` to (state, previous action) with switching penalty ``T``.

    ``reward((b, a_prev), a) = R(b, a) − T·1[a ≠ a_prev]``; the next extended
    state is ``(b', a)`` with ``b'`` drawn from the base kernel.

    Args:
        mdp: Event-level MDP
        T: Nonnegative switching penalty

    Returns:
        SwitchingCostMDP with ``n_states · n_actions`` extended states
    """
    if T < 0:
        raise ValueError(f"switching cost must be nonnegative, got {T}")
    n_s, n_a = mdp.n_states, mdp.n_actions
    n_ext = n_s * n_a
    base_state = np.repeat(np.arange(n_s), n_a)
    prev_action = np.tile(np.arange(n_a), n_s)

    transition = np.zeros((n_ext, n_a, n_ext))
    reward = np.empty((n_ext, n_a))
    for a in range(n_a):
        # next extended states (b', a) sit at columns b'·n_a + a
        transition[:, a, a::n_a] = mdp.transition[base_state, a, :]
        reward[:, a] = mdp.reward[base_state, a] - T * (prev_action != a)
    extended = FiniteMDP(transition=transition, reward=reward, discount=mdp.discount)
    return SwitchingCostMDP(
        mdp=extended, base_state=base_state, prev_action=prev_action, penalty=float(T)
    )
