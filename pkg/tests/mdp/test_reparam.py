"""
Tests for the k-aggregation and switching-cost reparameterizations.
"""

import numpy as np
import pytest

from advamp.mdp.models import FiniteMDP
from advamp.mdp.reparam import (
    aggregate_mdp,
    extended_index,
    persistent_optimal_states,
    repetition_q,
    switching_cost_mdp,
)
from advamp.mdp.solvers import solve_q_star


class TestAggregateMDP:
    def test_k_one_is_identity(self, make_random_mdp):
        mdp = make_random_mdp(n_states=5, n_actions=2)
        aggregated = aggregate_mdp(mdp, 1)
        np.testing.assert_array_equal(aggregated.transition, mdp.transition)
        np.testing.assert_array_equal(aggregated.reward, mdp.reward)
        assert aggregated.discount == mdp.discount

    def test_discounted_reward_sum(self, single_state_mdp):
        aggregated = aggregate_mdp(single_state_mdp, 3)
        np.testing.assert_allclose(aggregated.reward, [[1.75, 0.0]])
        assert aggregated.discount == pytest.approx(0.125)

    def test_kernel_is_matrix_power(self, make_random_mdp):
        mdp = make_random_mdp(n_states=4, n_actions=2, seed=3)
        aggregated = aggregate_mdp(mdp, 4)
        for a in range(mdp.n_actions):
            expected = np.linalg.matrix_power(mdp.transition[:, a, :], 4)
            np.testing.assert_allclose(aggregated.transition[:, a, :], expected)

    def test_value_never_exceeds_event_level(self, make_random_mdp):
        mdp = make_random_mdp(n_states=6, n_actions=3, gamma=0.9, seed=5)
        v_star = solve_q_star(mdp, tol=1e-10).state_values()
        v_agg = solve_q_star(aggregate_mdp(mdp, 3), tol=1e-10).state_values()
        assert np.all(v_agg <= v_star + 2e-10)

    def test_invalid_k(self, single_state_mdp):
        with pytest.raises(ValueError, match="at least 1"):
            aggregate_mdp(single_state_mdp, 0)


class TestRepetition:
    def test_persistent_states(self, two_state_mdp):
        q_star = solve_q_star(two_state_mdp, tol=1e-10)
        # state 0 moves (action 1) into state 1, where staying is optimal
        np.testing.assert_array_equal(
            persistent_optimal_states(two_state_mdp, q_star, 3), [False, True]
        )
        assert persistent_optimal_states(two_state_mdp, q_star, 1).all()

    def test_equals_q_star_where_action_persists(self, two_state_mdp):
        q_star = solve_q_star(two_state_mdp, tol=1e-10)
        repeated = repetition_q(two_state_mdp, q_star, 3)
        assert repeated.values[1, 0] == pytest.approx(q_star.values[1, 0], abs=1e-9)

    def test_loses_where_action_changes(self, two_state_mdp):
        q_star = solve_q_star(two_state_mdp, tol=1e-10)
        repeated = repetition_q(two_state_mdp, q_star, 2)
        # moving twice returns to state 0: 0 + 0.9 * 0 + 0.81 * 9
        assert repeated.values[0, 1] == pytest.approx(0.81 * 9.0, abs=1e-8)
        assert repeated.values[0, 1] < q_star.values[0, 1]


class TestSwitchingCost:
    @pytest.fixture
    def sticky_mdp(self):
        return FiniteMDP(
            transition=np.ones((1, 2, 1)), reward=[[1.0, 0.0]], discount=0.9
        )

    def test_extended_index(self):
        assert extended_index(3, 1, 2) == 7
        np.testing.assert_array_equal(
            extended_index(np.array([0, 1]), np.array([1, 0]), 3), [1, 3]
        )

    def test_structure(self, sticky_mdp):
        extended = switching_cost_mdp(sticky_mdp, 5.0)
        assert extended.mdp.n_states == 2
        np.testing.assert_array_equal(extended.base_state, [0, 0])
        np.testing.assert_array_equal(extended.prev_action, [0, 1])
        np.testing.assert_allclose(extended.mdp.reward, [[1.0, -5.0], [-4.0, 0.0]])
        # choosing action a always lands in (b', a)
        assert extended.mdp.transition[0, 1, 1] == 1.0
        assert extended.mdp.transition[1, 0, 0] == 1.0
        assert extended.index(0, 1) == 1

    def test_high_penalty_never_switches(self, sticky_mdp):
        extended = switching_cost_mdp(sticky_mdp, 5.0)
        q = solve_q_star(extended.mdp, tol=1e-10).values
        np.testing.assert_allclose(q, [[10.0, -0.5], [5.0, 4.5]], atol=1e-8)
        assert int(np.argmax(q[0])) == 0

    def test_zero_penalty_matches_base(self, make_random_mdp):
        mdp = make_random_mdp(n_states=4, n_actions=3, gamma=0.9, seed=1)
        extended = switching_cost_mdp(mdp, 0.0)
        q_ext = solve_q_star(extended.mdp, tol=1e-9).values
        q_star = solve_q_star(mdp, tol=1e-9).values
        np.testing.assert_allclose(q_ext, q_star[extended.base_state], atol=2e-9)

    def test_negative_penalty(self, sticky_mdp):
        with pytest.raises(ValueError, match="nonnegative"):
            switching_cost_mdp(sticky_mdp, -1.0)
