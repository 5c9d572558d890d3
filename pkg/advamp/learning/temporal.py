"""
Trajectory-level temporal abstraction wrappers.

These act on simulators (``ChocKaleEnv``, ``SlateEnv``) rather than explicit
MDPs. ``aggregate_step`` executes an action k times and returns the
internally discounted reward, so that bootstrapping with ``γ^k`` reproduces
event-level returns; ``switch_step`` charges the fictitious penalty T on an
action change and reports the learner's extended observation
(bucket, previous action).
"""

import logging
from typing import (
    Annotated,
    Literal,
    NamedTuple,
    Optional,
    Protocol,
    Tuple,
    Union,
)

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from advamp.mdp.reparam import extended_index

logger = logging.getLogger(__name__)


class Env(Protocol):
    """Interface shared by the batched simulators."""

    n_actions: int
    n_observations: int
    events: int

    def reset(self, rng: np.random.Generator, n: int = 1) -> np.ndarray: ...

    def step(
        self, actions, rng: np.random.Generator
    ) -> Tuple[np.ndarray, np.ndarray]: ...


class EnvStep(NamedTuple):
    """
    One learner-level interaction.

    ``reward`` is what the learner is trained on; ``penalty`` is the
    fictitious switching cost already subtracted from it, so the raw
    environment reward is ``reward + penalty``.
    """

    observation: np.ndarray
    reward: np.ndarray
    events_elapsed: int
    penalty: np.ndarray

    @property
    def raw_reward(self) -> np.ndarray:
        return self.reward + self.penalty


class AggregateConfig(BaseModel):
    """Fixed repetition horizon."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["aggregate"] = "aggregate"
    k: int = Field(..., ge=1)

    def label(self) -> str:
        return f"aggregate(k={self.k})"


class SwitchConfig(BaseModel):
    """Fictitious switching penalty."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["switch"] = "switch"
    T: float = Field(..., ge=0.0)

    def label(self) -> str:
        return f"switch(T={self.T:g})"


Wrapper = Optional[
    Annotated[Union[AggregateConfig, SwitchConfig], Field(discriminator="kind")]
]


def wrapper_label(wrapper: Wrapper) -> str:
    """Stable text identifier of a wrapper, used in CSV rows and seeds."""
    return "none" if wrapper is None else wrapper.label()


def aggregate_step(
    env: Env, action, k: int, gamma: float, rng: np.random.Generator
) -> EnvStep:
    """
    Execute ``action`` for ``k`` consecutive base events.

    Args:
        env: Simulator
        action: Action (one per user in the batch)
        k: Repetition horizon, at least 1
        gamma: Event-level discount
        rng: Generator driving the simulator

    Returns:
        EnvStep with reward ``Σ_{i<k} γ^i r_i``, the observation after the
        k-th event and ``events_elapsed = k``
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    total = None
    observation = None
    for i in range(k):
        observation, reward = env.step(action, rng)
        total = reward * gamma**i if total is None else total + reward * gamma**i
    return EnvStep(
        observation=observation,
        reward=total,
        events_elapsed=k,
        penalty=np.zeros_like(total),
    )


def switch_step(
    env: Env, action, prev_action, T: float, rng: np.random.Generator
) -> EnvStep:
    """
    One base event with a switching penalty.

    Returns:
        EnvStep whose reward is reduced by ``T`` where ``action ≠ prev_action``
        and whose observation is the extended index of
        (next bucket, ``action``)
    """
    observation, reward = env.step(action, rng)
    action = np.broadcast_to(np.asarray(action), reward.shape)
    switched = action != np.asarray(prev_action)
    penalty = T * switched.astype(float)
    return EnvStep(
        observation=extended_index(observation, action, env.n_actions),
        reward=reward - penalty,
        events_elapsed=1,
        penalty=penalty,
    )


def penalized_return_decomposition(
    rewards, actions, T: float, gamma: float
) -> Tuple[Union[float, np.ndarray], Union[float, np.ndarray]]:
    """
    Split switching-cost trajectories into raw return and discounted penalty.

    Time runs along the first axis; further axes index independent
    trajectories. The first action counts as no switch.

    Args:
        rewards: Raw (unpenalized) rewards per event
        actions: Action taken at each event, same shape as ``rewards``
        T: Switching penalty
        gamma: Discount

    Returns:
        Tuple of (raw discounted return, discounted penalty paid), floats for
        a single trajectory and arrays otherwise; the penalized return is
        their difference
    """
    rewards = np.asarray(rewards, dtype=float)
    actions = np.asarray(actions)
    if rewards.shape != actions.shape:
        raise ValueError("rewards and actions must have the same length")
    weights = gamma ** np.arange(rewards.shape[0])
    switches = np.zeros(rewards.shape)
    switches[1:] = actions[1:] != actions[:-1]
    raw = np.tensordot(weights, rewards, axes=1)
    penalty = T * np.tensordot(weights, switches, axes=1)
    if raw.ndim == 0:
        return float(raw), float(penalty)
    return raw, penalty


def base_step(env: Env, action, rng: np.random.Generator) -> EnvStep:
    """One unwrapped base event as an EnvStep."""
    observation, reward = env.step(action, rng)
    return EnvStep(
        observation=observation,
        reward=reward,
        events_elapsed=1,
        penalty=np.zeros_like(reward),
    )
