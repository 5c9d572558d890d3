"""
Tests for tabular Q-learning and Monte Carlo evaluation.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from advamp.envs.choc_kale import (
    ChocKaleEnv,
    CKParams,
    ObservationModel,
    satisfaction,
)
from advamp.learning.qlearn import (
    ObservationSpaceError,
    QLearnConfig,
    TrainedPolicy,
    evaluate,
    train,
    train_with_stats,
)
from advamp.learning.temporal import AggregateConfig, SwitchConfig
from advamp.mdp.models import QTable


class ContinuousEnv:
    n_actions = 2
    n_observations = None
    events = 0

    def reset(self, rng, n=1):
        return np.zeros(n)

    def step(self, actions, rng):
        return np.zeros(1), np.zeros(1)


class TestQLearnConfig:
    def test_defaults(self):
        config = QLearnConfig()
        assert config.n_events == 30000
        assert config.alpha0 == 1.0
        assert config.alpha_decay == 0.3
        assert config.init_q == 0.0

    @pytest.mark.parametrize(
        "field,value",
        [("n_events", 0), ("alpha0", 0.0), ("alpha0", 1.5), ("gamma", 1.0)],
    )
    def test_invalid_values(self, field, value):
        with pytest.raises(ValidationError):
            QLearnConfig(**{field: value})


class TestTraining:
    def test_converges_on_constant_reward(self, constant_env):
        config = QLearnConfig(n_events=4000, alpha_decay=1.0, gamma=0.1, seed=1)
        policy = train(constant_env(rewards=(1.0, 1.0)), None, config)
        # fixed point 1 / (1 - 0.1)
        np.testing.assert_allclose(policy.q.values, 1.0 / 0.9, atol=1e-2)

    def test_zero_reward_keeps_initial_values(self, constant_env):
        config = QLearnConfig(n_events=500, seed=2)
        policy = train(constant_env(rewards=(0.0, 0.0)), None, config)
        np.testing.assert_array_equal(policy.q.values, np.zeros((1, 2)))

    def test_learns_better_action(self, constant_env):
        config = QLearnConfig(n_events=2000, gamma=0.5, seed=3)
        policy = train(constant_env(rewards=(0.0, 1.0)), None, config)
        assert int(policy.act([0])[0]) == 1

    def test_event_accounting(self, constant_env):
        config = QLearnConfig(n_events=100, seed=0)
        _, stats = train_with_stats(constant_env(), None, config)
        assert stats.events == 100
        assert stats.learner_steps == 100
        assert int(stats.visits.sum()) == 100
        assert stats.bootstrap_exponents == {1}

    def test_aggregate_accounting(self, constant_env):
        config = QLearnConfig(n_events=10, seed=0)
        env = constant_env()
        _, stats = train_with_stats(env, AggregateConfig(k=3), config)
        assert stats.learner_steps == 4
        assert stats.events == 12
        assert stats.bootstrap_exponents == {3}
        assert env.events == 12

    def test_switch_table_covers_previous_action(self, constant_env):
        config = QLearnConfig(n_events=50, seed=0)
        policy = train(constant_env(rewards=(1.0, 1.0, 1.0)), SwitchConfig(T=1.0), config)
        assert policy.q.values.shape == (3, 3)

    def test_deterministic(self, ck_params):
        model = ObservationModel(sigma_n=0.2, n_buckets=10)
        config = QLearnConfig(n_events=500, seed=11)
        first = train(ChocKaleEnv(ck_params, model), None, config)
        second = train(ChocKaleEnv(ck_params, model), None, config)
        np.testing.assert_array_equal(first.q.values, second.q.values)

    def test_seed_changes_table(self, ck_params):
        model = ObservationModel(sigma_n=0.2, n_buckets=10)
        first = train(ChocKaleEnv(ck_params, model), None, QLearnConfig(n_events=500, seed=1))
        second = train(ChocKaleEnv(ck_params, model), None, QLearnConfig(n_events=500, seed=2))
        assert not np.array_equal(first.q.values, second.q.values)

    def test_continuous_observations_rejected(self):
        with pytest.raises(ObservationSpaceError):
            train(ContinuousEnv(), None, QLearnConfig(n_events=10))


class TestTrainedPolicy:
    def test_hold(self):
        q = QTable(values=np.zeros((2, 2)))
        assert TrainedPolicy(q=q, n_actions=2).hold == 1
        assert TrainedPolicy(q=q, n_actions=2, wrapper=AggregateConfig(k=4)).hold == 4
        assert TrainedPolicy(q=q, n_actions=2, wrapper=SwitchConfig(T=1.0)).hold == 1

    def test_act_event_level(self):
        policy = TrainedPolicy(q=QTable(values=[[1.0, 0.0], [0.0, 1.0]]), n_actions=2)
        np.testing.assert_array_equal(policy.act([0, 1, 1]), [0, 1, 1])

    def test_act_with_previous_action(self):
        # extended rows (bucket 0, prev 0) and (bucket 0, prev 1)
        q = QTable(values=[[3.0, 0.0], [0.0, 2.0]])
        policy = TrainedPolicy(q=q, n_actions=2, wrapper=SwitchConfig(T=1.0))
        assert int(policy.act([0])[0]) == 0
        assert int(policy.act([0], prev_action=[0])[0]) == 0
        assert int(policy.act([0], prev_action=[1])[0]) == 1

    def test_json_round_trip(self):
        policy = TrainedPolicy(
            q=QTable(values=[[1.0, 2.0]]),
            n_actions=2,
            wrapper=AggregateConfig(k=3),
            config=QLearnConfig(n_events=10, seed=4),
            environment="slate",
            sigma_n=0.2,
        )
        restored = TrainedPolicy.from_json_dict(policy.to_json_dict())
        np.testing.assert_array_equal(restored.q.values, policy.q.values)
        assert restored.wrapper == AggregateConfig(k=3)
        assert restored.config == policy.config
        assert restored.environment == "slate"
        assert restored.sigma_n == 0.2


class TestEvaluate:
    def test_constant_return(self, constant_env):
        policy = TrainedPolicy(q=QTable(values=[[0.0, 1.0]]), n_actions=2)
        result = evaluate(
            constant_env(rewards=(0.0, 1.0)), policy, n_rollouts=4, horizon=3, gamma=0.5
        )
        assert result.mean_return == pytest.approx(1.75)
        assert result.std_error == 0.0
        assert result.returns.shape == (4,)

    def test_single_rollout_has_no_error_bar(self, constant_env):
        policy = TrainedPolicy(q=QTable(values=[[0.0, 1.0]]), n_actions=2)
        result = evaluate(constant_env(), policy, n_rollouts=1, horizon=2)
        assert result.std_error == 0.0

    def test_switching_penalty_not_scored(self, constant_env):
        # the switch table prefers action 1 from a fresh start
        q = QTable(values=[[0.0, 0.0], [0.0, 5.0]])
        policy = TrainedPolicy(q=q, n_actions=2, wrapper=SwitchConfig(T=100.0))
        result = evaluate(
            constant_env(rewards=(0.0, 1.0)), policy, n_rollouts=2, horizon=2, gamma=0.5
        )
        assert result.mean_return == pytest.approx(1.5)
        assert result.penalty_paid == 0.0

    def test_switching_penalty_reported(self, constant_env):
        # each row prefers the other action, so rollouts alternate 0, 1, 0
        q = QTable(values=[[0.0, 5.0], [5.0, 0.0]])
        policy = TrainedPolicy(q=q, n_actions=2, wrapper=SwitchConfig(T=2.0))
        result = evaluate(
            constant_env(rewards=(0.0, 1.0)), policy, n_rollouts=2, horizon=3, gamma=0.5
        )
        assert result.mean_return == pytest.approx(0.5)
        assert result.penalty_paid == pytest.approx(2.0 * (0.5 + 0.25))

    def test_no_penalty_without_switching_cost(self, constant_env):
        policy = TrainedPolicy(q=QTable(values=[[0.0, 1.0]]), n_actions=2)
        result = evaluate(constant_env(), policy, n_rollouts=2, horizon=5)
        assert result.penalty_paid == 0.0

    def test_aggregate_holds_decisions(self, constant_env):
        env = constant_env()
        q = QTable(values=[[0.0, 1.0]])
        policy = TrainedPolicy(q=q, n_actions=2, wrapper=AggregateConfig(k=3))
        evaluate(env, policy, n_rollouts=2, horizon=7)
        assert env.events == 7

    def test_invalid_arguments(self, constant_env):
        policy = TrainedPolicy(q=QTable(values=[[0.0, 1.0]]), n_actions=2)
        with pytest.raises(ValueError, match="horizon"):
            evaluate(constant_env(), policy, horizon=0)
        with pytest.raises(ValueError, match="n_rollouts"):
            evaluate(constant_env(), policy, n_rollouts=0)

    def test_always_choc_matches_closed_trajectory(self):
        params = CKParams(sigma_choc=0.0, sigma_kale=0.0)
        env = ChocKaleEnv(params, ObservationModel(sigma_n=0.0, n_buckets=50))
        policy = TrainedPolicy(q=QTable(values=[[1.0, 0.0]] * 50), n_actions=2)
        result = evaluate(env, policy, n_rollouts=3, horizon=200, gamma=0.95)

        expected, p = 0.0, 0.0
        for t in range(200):
            expected += 0.95**t * 8.0 * satisfaction(p, params.tau)
            p = params.beta * p - 1.0
        assert result.mean_return == pytest.approx(expected, rel=1e-9)
        assert result.std_error == pytest.approx(0.0, abs=1e-9)
