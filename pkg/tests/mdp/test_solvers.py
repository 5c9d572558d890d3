"""
Tests for the exact solvers and diagnostics.
"""

import math

import numpy as np
import pytest

from advamp.analysis.verify import random_policy
from advamp.envs.choc_kale import build_discrete_mdp
from advamp.mdp.models import DeterministicPolicy, FiniteMDP, QTable
from advamp.mdp.solvers import (
    advantages,
    bellman_optimality_backup,
    counterfactual_gap,
    counterfactual_horizon,
    greedy,
    policy_q,
    smoothness,
    snr,
    solve_q_star,
    state_distribution_trajectory,
)


class TestSolveQStar:
    def test_single_state(self, single_state_mdp):
        # V* = 1/(1 - 0.5) = 2
        q = solve_q_star(single_state_mdp, tol=1e-10)
        np.testing.assert_allclose(q.values, [[2.0, 1.0]], atol=1e-10)

    def test_two_state(self, two_state_mdp):
        q = solve_q_star(two_state_mdp, tol=1e-10)
        np.testing.assert_allclose(q.values, [[8.1, 9.0], [10.0, 8.1]], atol=1e-9)

    def test_zero_discount_is_reward(self, make_random_mdp):
        mdp = make_random_mdp(gamma=0.0)
        np.testing.assert_array_equal(solve_q_star(mdp).values, mdp.reward)

    def test_residual_within_tolerance(self, make_random_mdp):
        tol = 1e-8
        mdp = make_random_mdp(n_states=8, n_actions=3, gamma=0.95, seed=4)
        q = solve_q_star(mdp, tol=tol).values
        residual = np.max(np.abs(bellman_optimality_backup(mdp, q) - q))
        assert residual <= tol * (1.0 - mdp.discount) + 1e-12

    def test_matches_linear_solve(self, make_random_mdp):
        mdp = make_random_mdp(n_states=6, n_actions=2, gamma=0.9, seed=7)
        q = solve_q_star(mdp, tol=1e-10)
        policy = greedy(q)
        rows = np.arange(mdp.n_states)
        kernel = mdp.transition[rows, policy.action_of]
        reward = mdp.reward[rows, policy.action_of]
        v = np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * kernel, reward)
        np.testing.assert_allclose(q.state_values(), v, atol=1e-9)

    @pytest.mark.parametrize("tol", [0.0, -1e-3])
    def test_nonpositive_tolerance(self, single_state_mdp, tol):
        with pytest.raises(ValueError, match="tol"):
            solve_q_star(single_state_mdp, tol=tol)


class TestPolicyQ:
    def test_suboptimal_policy(self, single_state_mdp):
        policy = DeterministicPolicy(action_of=[1], n_actions=2)
        q = policy_q(single_state_mdp, policy, tol=1e-10)
        np.testing.assert_allclose(q.values, [[1.0, 0.0]], atol=1e-10)

    def test_optimal_policy_recovers_q_star(self, make_random_mdp):
        mdp = make_random_mdp(n_states=5, n_actions=3, gamma=0.9, seed=2)
        q_star = solve_q_star(mdp, tol=1e-10)
        q_pi = policy_q(mdp, greedy(q_star), tol=1e-10)
        np.testing.assert_allclose(q_pi.values, q_star.values, atol=1e-8)

    def test_policy_size_mismatch(self, two_state_mdp):
        policy = DeterministicPolicy(action_of=[0, 0, 0], n_actions=2)
        with pytest.raises(ValueError, match="does not match"):
            policy_q(two_state_mdp, policy)


class TestGreedyAndAdvantages:
    def test_ties_break_to_lowest_index(self):
        policy = greedy(QTable(values=[[1.0, 1.0], [0.0, 2.0], [3.0, 3.0]]))
        np.testing.assert_array_equal(policy.action_of, [0, 1, 0])

    def test_best_and_second(self):
        profile = advantages(QTable(values=[[3.0, 1.0, 2.0], [0.0, 0.0, 5.0]]))
        np.testing.assert_array_equal(profile.best_action, [0, 2])
        np.testing.assert_array_equal(profile.second_action, [2, 0])
        np.testing.assert_allclose(profile.advantage, [1.0, 5.0])

    def test_ties_give_zero_advantage(self):
        profile = advantages(QTable(values=[[1.0, 1.0]]))
        assert profile.advantage[0] == 0.0
        assert profile.best_action[0] != profile.second_action[0]

    def test_single_action_rejected(self):
        with pytest.raises(ValueError, match="two actions"):
            advantages(QTable(values=[[1.0], [2.0]]))

    def test_two_state_advantages(self, two_state_mdp):
        profile = advantages(solve_q_star(two_state_mdp, tol=1e-10))
        np.testing.assert_allclose(profile.advantage, [0.9, 1.9], atol=1e-8)

    @pytest.mark.parametrize("scale,shift", [(2.0, 0.0), (0.5, 3.0), (10.0, -1.0)])
    def test_greedy_ignores_positive_affine_rescaling(
        self, make_random_mdp, scale, shift
    ):
        mdp = make_random_mdp(n_states=8, n_actions=3, gamma=0.9, seed=4)
        rescaled = FiniteMDP(
            transition=mdp.transition,
            reward=scale * mdp.reward + shift,
            discount=mdp.discount,
        )
        q = solve_q_star(mdp)
        original = greedy(q).action_of
        shifted = QTable(values=scale * q.values + shift)
        np.testing.assert_array_equal(greedy(shifted).action_of, original)
        solved = greedy(solve_q_star(rescaled)).action_of
        np.testing.assert_array_equal(solved, original)


class TestSmoothness:
    def test_single_state_is_zero(self, single_state_mdp):
        assert smoothness(single_state_mdp, solve_q_star(single_state_mdp)) == 0.0

    def test_two_state(self, two_state_mdp):
        q = solve_q_star(two_state_mdp, tol=1e-10)
        assert smoothness(two_state_mdp, q) == pytest.approx(1.9, abs=1e-8)

    def test_unreachable_pairs_ignored(self):
        # both states are absorbing, so no transition crosses between them
        transition = np.zeros((2, 1, 2))
        transition[0, 0, 0] = 1.0
        transition[1, 0, 1] = 1.0
        mdp = FiniteMDP(transition=transition, reward=[[0.0], [1.0]], discount=0.5)
        assert smoothness(mdp, QTable(values=[[0.0], [2.0]])) == 0.0

    def test_shape_mismatch(self, two_state_mdp):
        with pytest.raises(ValueError):
            smoothness(two_state_mdp, QTable(values=np.zeros((3, 2))))


class TestSNR:
    def test_ratio(self):
        # threshold 2 * 0.1 * 1 / 0.25 = 0.8 keeps only the 0.5 gap
        q = QTable(values=[[1.0, 0.0], [0.5, 0.0]])
        assert snr(q, epsilon=0.1, r_max=1.0, gamma=0.5) == pytest.approx(1.0)

    def test_empty_denominator_is_infinite(self):
        q = QTable(values=[[1.0, 0.0], [2.0, 0.0]])
        assert snr(q, epsilon=0.0, r_max=1.0, gamma=0.5) == math.inf

    def test_zero_denominator_is_infinite(self):
        q = QTable(values=[[1.0, 0.0], [1.0, 1.0]])
        assert snr(q, epsilon=0.0, r_max=1.0, gamma=0.5) == math.inf

    def test_median_advantage_threshold(self, ck_params):
        mdp = build_discrete_mdp(ck_params, n_buckets=50)
        q = solve_q_star(mdp)
        gaps = np.sort(advantages(q).advantage)
        median = gaps[(gaps.size - 1) // 2]
        gamma = mdp.discount
        epsilon = median * (1.0 - gamma) ** 2 / (2.0 * mdp.r_max) * (1.0 + 1e-12)
        value = snr(q, epsilon=epsilon, r_max=mdp.r_max, gamma=gamma)
        assert value == pytest.approx(gaps[-1] / median - 1.0)

    def test_invalid_inputs(self):
        q = QTable(values=[[1.0, 0.0]])
        with pytest.raises(ValueError):
            snr(q, epsilon=-1.0, r_max=1.0, gamma=0.5)
        with pytest.raises(ValueError):
            snr(q, epsilon=0.1, r_max=0.0, gamma=0.5)


class TestCounterfactual:
    def test_distributions_are_stochastic(self, make_random_mdp, rng):
        mdp = make_random_mdp(n_states=5, n_actions=2)
        policy = random_policy(rng, 5, 2)
        distributions = state_distribution_trajectory(mdp, policy, 0, 20)
        assert distributions.shape == (20, 5)
        np.testing.assert_allclose(distributions.sum(axis=1), 1.0)
        assert distributions[0, 0] == 1.0

    def test_identity_holds(self, make_random_mdp, rng):
        tol = 1e-6
        for seed in range(5):
            mdp = make_random_mdp(n_states=6, n_actions=3, gamma=0.9, seed=seed)
            pi = random_policy(rng, 6, 3)
            rho = random_policy(rng, 6, 3)
            lhs, rhs = counterfactual_gap(mdp, pi, rho, b=seed % 6, tol=tol)
            assert abs(lhs - rhs) <= 2.0 * tol

    def test_same_policy_gives_zero(self, make_random_mdp, rng):
        mdp = make_random_mdp()
        pi = random_policy(rng, mdp.n_states, mdp.n_actions)
        lhs, rhs = counterfactual_gap(mdp, pi, pi, b=0, tol=1e-6)
        assert lhs == 0.0
        assert rhs == 0.0

    def test_difference_at_unreachable_state(self):
        # states 0 and 1 never reach state 2
        transition = np.zeros((3, 2, 3))
        transition[0, :, 1] = 1.0
        transition[1, 0, 0] = 1.0
        transition[1, 1, 1] = 1.0
        transition[2, :, 0] = 1.0
        reward = np.array([[1.0, 0.0], [0.0, 2.0], [5.0, 0.0]])
        mdp = FiniteMDP(transition=transition, reward=reward, discount=0.9)
        pi = DeterministicPolicy(action_of=[0, 1, 0], n_actions=2)
        rho = DeterministicPolicy(action_of=[0, 1, 1], n_actions=2)
        tol = 1e-6
        lhs, rhs = counterfactual_gap(mdp, pi, rho, b=0, tol=tol)
        assert abs(lhs) <= 2.0 * tol
        assert rhs == 0.0

    def test_short_horizon_rejected(self, make_random_mdp, rng):
        mdp = make_random_mdp()
        pi = random_policy(rng, mdp.n_states, mdp.n_actions)
        needed = counterfactual_horizon(mdp, 1e-6)
        with pytest.raises(ValueError, match="too short"):
            counterfactual_gap(mdp, pi, pi, b=0, horizon=needed - 1, tol=1e-6)
