"""
advamp.learning.qlearn
~~~~~~~~~~~~~~~~~~~~~~

Tabular Q-learning on bucketed observations and Monte Carlo evaluation.

Training follows one continuous trajectory from exposure 0 with a uniformly
random behaviour policy (random aggregated actions under aggregation) until
the base-event budget is spent. Every update bootstraps with
``γ^{events_elapsed}`` of the step it consumes.

Evaluation always reports the raw discounted return: aggregated policies
execute base events, and switching penalties never enter the score. The
discounted penalty a switching policy would have paid is reported next to it.
"""

import logging
import math
from typing import Any, Dict, Literal, NamedTuple, Optional, Set

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from advamp import settings
from advamp.learning.temporal import (
    AggregateConfig,
    Env,
    EnvStep,
    SwitchConfig,
    Wrapper,
    aggregate_step,
    base_step,
    penalized_return_decomposition,
    switch_step,
    wrapper_label,
)
from advamp.mdp.models import DeterministicPolicy, QTable
from advamp.mdp.reparam import extended_index
from advamp.mdp.solvers import greedy

logger = logging.getLogger(__name__)

EnvironmentName = Literal["ck", "slate"]


class ObservationSpaceError(ValueError):
    """Raised when a learner is handed a non-finite observation space."""


class QLearnConfig(BaseModel):
    """Training budget, learning-rate schedule, discount and seed."""

    model_config = ConfigDict(frozen=True)

    n_events: int = Field(settings.QLEARN_DEFAULTS["n_events"], gt=0)
    alpha0: float = Field(settings.QLEARN_DEFAULTS["alpha0"], gt=0.0, le=1.0)
    alpha_decay: float = Field(settings.QLEARN_DEFAULTS["alpha_decay"], ge=0.0)
    gamma: float = Field(settings.CK_DEFAULTS["gamma"], ge=0.0, lt=1.0)
    init_q: float = settings.QLEARN_DEFAULTS["init_q"]
    seed: int = 0


class TrainingStats(NamedTuple):
    """Bookkeeping of one training run."""

    learner_steps: int
    events: int
    visits: np.ndarray
    bootstrap_exponents: Set[int]


class TrainedPolicy(BaseModel):
    """Learned Q-table together with the setting it was trained in."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    q: QTable
    n_actions: int
    wrapper: Wrapper = None
    config: QLearnConfig = Field(default_factory=QLearnConfig)
    environment: EnvironmentName = "ck"
    sigma_n: float = 0.0

    @property
    def greedy_policy(self) -> DeterministicPolicy:
        return greedy(self.q)

    @property
    def hold(self) -> int:
        """Number of base events each decision is held for."""
        return self.wrapper.k if isinstance(self.wrapper, AggregateConfig) else 1

    @property
    def switch_penalty(self) -> float:
        return self.wrapper.T if isinstance(self.wrapper, SwitchConfig) else 0.0

    def act(self, observation, prev_action=None) -> np.ndarray:
        """
        Greedy actions for a batch of observation buckets.

        Under a switching cost the table is indexed by (bucket, previous
        action); at the first decision there is no previous action and each
        candidate is scored as if it had also been the previous one.
        """
        observation = np.atleast_1d(np.asarray(observation, dtype=np.int64))
        values = self.q.values
        if not isinstance(self.wrapper, SwitchConfig):
            return np.argmax(values[observation], axis=1)
        actions = np.arange(self.n_actions)
        if prev_action is None:
            rows = extended_index(
                observation[:, None], actions[None, :], self.n_actions
            )
            return np.argmax(values[rows, actions[None, :]], axis=1)
        prev_action = np.broadcast_to(np.asarray(prev_action), observation.shape)
        rows = extended_index(observation, prev_action, self.n_actions)
        return np.argmax(values[rows], axis=1)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q.values.tolist(),
            "n_actions": self.n_actions,
            "wrapper": None if self.wrapper is None else self.wrapper.model_dump(),
            "config": self.config.model_dump(),
            "environment": self.environment,
            "sigma_n": self.sigma_n,
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> "TrainedPolicy":
        return cls(
            q=QTable(values=data["q"]),
            n_actions=data["n_actions"],
            wrapper=data.get("wrapper"),
            config=QLearnConfig(**data.get("config", {})),
            environment=data.get("environment", "ck"),
            sigma_n=data.get("sigma_n", 0.0),
        )


def _learner_step(
    env: Env, wrapper: Wrapper, action: int, prev_action, gamma, rng
) -> EnvStep:
    if isinstance(wrapper, AggregateConfig):
        return aggregate_step(env, action, wrapper.k, gamma, rng)
    if isinstance(wrapper, SwitchConfig):
        return switch_step(env, action, prev_action, wrapper.T, rng)
    return base_step(env, action, rng)


def train_with_stats(
    env: Env,
    wrapper: Wrapper,
    config: QLearnConfig,
    environment: EnvironmentName = "ck",
    sigma_n: float = 0.0,
):
    """
    Run Q-learning and return the policy together with its TrainingStats.

    Raises:
        ObservationSpaceError: If the environment's observation space is not
            a finite set of buckets
    """
    n_observations = getattr(env, "n_observations", None)
    if not isinstance(n_observations, (int, np.integer)) or n_observations < 1:
        raise ObservationSpaceError(
            "Q-learning needs a finite bucketed observation space"
        )
    n_actions = int(env.n_actions)
    switching = isinstance(wrapper, SwitchConfig)
    n_states = int(n_observations) * n_actions if switching else int(n_observations)

    rng = np.random.default_rng(config.seed)
    q = np.full((n_states, n_actions), float(config.init_q))
    visits = np.zeros((n_states, n_actions), dtype=np.int64)
    exponents: Set[int] = set()

    observation = int(env.reset(rng, n=1)[0])
    prev_action: Optional[int] = None
    events = 0
    steps = 0
    while events < config.n_events:
        action = int(rng.integers(n_actions))
        if switching:
            if prev_action is None:
                prev_action = action
            state = int(extended_index(observation, prev_action, n_actions))
        else:
            state = observation
        outcome = _learner_step(env, wrapper, action, prev_action, config.gamma, rng)
        next_state = int(outcome.observation[0])

        exponents.add(outcome.events_elapsed)
        discount = config.gamma**outcome.events_elapsed
        alpha = config.alpha0 / (1.0 + visits[state, action]) ** config.alpha_decay
        target = float(outcome.reward[0]) + discount * q[next_state].max()
        q[state, action] += alpha * (target - q[state, action])
        visits[state, action] += 1

        events += outcome.events_elapsed
        steps += 1
        if switching:
            observation = next_state // n_actions
            prev_action = action
        else:
            observation = next_state

    logger.debug(
        f"Trained {wrapper_label(wrapper)} policy: {steps} learner steps, "
        f"{events} base events, seed {config.seed}"
    )
    policy = TrainedPolicy(
        q=QTable(values=q),
        n_actions=n_actions,
        wrapper=wrapper,
        config=config,
        environment=environment,
        sigma_n=sigma_n,
    )
    return policy, TrainingStats(
        learner_steps=steps, events=events, visits=visits, bootstrap_exponents=exponents
    )


def train(
    env: Env,
    wrapper: Wrapper,
    config: QLearnConfig,
    environment: EnvironmentName = "ck",
    sigma_n: float = 0.0,
) -> TrainedPolicy:
    """
    Train a tabular Q-learning policy with uniformly random exploration.

    Args:
        env: Batched simulator; training drives a single user
        wrapper: None, AggregateConfig or SwitchConfig
        config: Budget, schedule, discount and seed
        environment: Name recorded in the policy metadata
        sigma_n: Observation noise recorded in the policy metadata

    Returns:
        TrainedPolicy; identical for identical (env parameters, config)
    """
    policy, _ = train_with_stats(env, wrapper, config, environment, sigma_n)
    return policy


class EvalResult(NamedTuple):
    mean_return: float
    std_error: float
    returns: np.ndarray
    penalty_paid: float = 0.0


def evaluate(
    env: Env,
    policy: TrainedPolicy,
    n_rollouts: int = settings.DEFAULT_N_ROLLOUTS,
    horizon: int = settings.DEFAULT_HORIZON,
    gamma: float = settings.CK_DEFAULTS["gamma"],
    seed: int = 0,
) -> EvalResult:
    """
    Monte Carlo estimate of the raw discounted return of a greedy policy.

    All rollouts start at exposure 0 and run in lockstep for ``horizon``
    base events; aggregated policies re-decide every k events. Switching
    penalties stay out of the return and are reported separately as the
    mean discounted penalty the policy would have paid.

    Returns:
        EvalResult with the mean return, its standard error
        (sample std / sqrt(n_rollouts)), the per-rollout returns and the
        mean discounted switching penalty (0 without a switching cost)
    """
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    if n_rollouts < 1:
        raise ValueError(f"n_rollouts must be at least 1, got {n_rollouts}")
    rng = np.random.default_rng(seed)
    observation = env.reset(rng, n=n_rollouts)
    reward_trace = np.empty((horizon, n_rollouts))
    action_trace = np.empty((horizon, n_rollouts), dtype=np.int64)
    hold = policy.hold
    prev_action = None
    actions = None
    for t in range(horizon):
        if t % hold == 0:
            actions = policy.act(observation, prev_action)
        observation, rewards = env.step(actions, rng)
        reward_trace[t] = rewards
        action_trace[t] = actions
        prev_action = actions
    returns, penalties = penalized_return_decomposition(
        reward_trace, action_trace, policy.switch_penalty, gamma
    )
    std_error = 0.0
    if n_rollouts > 1:
        std_error = float(returns.std(ddof=1) / math.sqrt(n_rollouts))
    return EvalResult(
        mean_return=float(returns.mean()),
        std_error=std_error,
        returns=returns,
        penalty_paid=float(penalties.mean()),
    )
