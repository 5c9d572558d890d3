"""
advamp.envs.slate
~~~~~~~~~~~~~~~~~

Slate variant of the Choc-Kale simulator.

Items carry a continuous kaleness score ``v ∈ [0, 1]``. Each event a slate of
items is drawn around the kaleness of the previously consumed item, the agent
picks a target score θ, and the user consumes item ``i`` with probability
``∝ exp(−|v(i) − θ|/λ)``. Consuming ``v`` moves exposure by ``2v − 1`` and
pays engagement with mean ``s(p)·(v·μ_Kale + (1−v)·μ_Choc)``, so the
endpoints reproduce the binary model exactly.
"""

import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import stats

from advamp import settings
from advamp.envs.choc_kale import (
    CKParams,
    ObservationModel,
    next_exposure,
    observe_satisfaction,
    satisfaction,
)

logger = logging.getLogger(__name__)


class SlateParams(BaseModel):
    """Slate size, user choice temperature, item spread and target scores."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n_items: int = Field(settings.SLATE_DEFAULTS["n_items"], ge=1)
    lambda_: float = Field(settings.SLATE_DEFAULTS["lambda_"], gt=0.0, alias="lambda")
    item_std: float = Field(settings.SLATE_DEFAULTS["item_std"], ge=0.0)
    targets: List[float] = Field(
        default_factory=lambda: list(settings.SLATE_DEFAULTS["targets"])
    )
    ck: CKParams = Field(default_factory=CKParams)

    @field_validator("targets")
    @classmethod
    def validate_targets(cls, v):
        if not v:
            raise ValueError("targets must not be empty")
        if any(t < 0.0 or t > 1.0 for t in v):
            raise ValueError("targets must lie in [0, 1]")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("targets must be strictly increasing")
        return v


class SlateState(BaseModel):
    """Exposure and the kaleness of the last consumed item."""

    model_config = ConfigDict(frozen=True)

    p: float = 0.0
    last_kaleness: float = Field(0.5, ge=0.0, le=1.0)


def draw_slates(
    last_kaleness, params: SlateParams, rng: np.random.Generator
) -> np.ndarray:
    """
    Draw one slate per user from ``N(last_kaleness, item_std²)`` truncated to [0, 1].

    Returns:
        Array of shape ``(n_users, n_items)``
    """
    anchor = np.atleast_1d(np.asarray(last_kaleness, dtype=float))[:, None]
    shape = (anchor.shape[0], params.n_items)
    if params.item_std == 0.0:
        return np.broadcast_to(anchor, shape).copy()
    low = (0.0 - anchor) / params.item_std
    high = (1.0 - anchor) / params.item_std
    draws = stats.truncnorm.rvs(
        low, high, loc=anchor, scale=params.item_std, size=shape, random_state=rng
    )
    return np.clip(draws, 0.0, 1.0)


def draw_slate(
    state: SlateState, params: SlateParams, rng: np.random.Generator
) -> np.ndarray:
    """Draw the slate shown to a single user in ``state``."""
    return draw_slates(state.last_kaleness, params, rng)[0]


def choice_probabilities(slates, theta, lambda_: float) -> np.ndarray:
    """Softmax ``P(i) ∝ exp(−|v(i) − θ|/λ)`` per row, computed with a max shift."""
    slates = np.atleast_2d(np.asarray(slates, dtype=float))
    theta = np.asarray(theta, dtype=float).reshape(-1, 1)
    logits = -np.abs(slates - theta) / lambda_
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)


def sample_choices(probabilities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample one index per row of a probability matrix."""
    cumulative = np.cumsum(probabilities, axis=1)
    u = rng.random(probabilities.shape[0])[:, None]
    chosen = (u >= cumulative).sum(axis=1)
    return np.minimum(chosen, probabilities.shape[1] - 1)


def user_choice(slate, theta: float, lambda_: float, rng: np.random.Generator) -> int:
    """
    Index of the item a user consumes from ``slate`` when nudged towards ``theta``.

    Raises:
        ValueError: If the slate is empty
    """
    slate = np.asarray(slate, dtype=float)
    if slate.size == 0:
        raise ValueError("slate must not be empty")
    return int(sample_choices(choice_probabilities(slate, theta, lambda_), rng)[0])


def consume(p, kaleness, params: SlateParams, rng: np.random.Generator):
    """Engagement and next exposure after consuming items with the given kaleness."""
    s = satisfaction(p, params.ck.tau)
    rewards = rng.normal(s * params.ck.mean_scale(kaleness), params.ck.sigma_kale)
    return next_exposure(p, kaleness, params.ck), rewards


def step(
    state: SlateState, theta: int, params: SlateParams, rng: np.random.Generator
) -> Tuple[SlateState, float]:
    """
    One slate event for the target score ``params.targets[theta]``.

    Returns:
        Tuple of (next state, engagement reward)

    Raises:
        ValueError: If ``theta`` does not index a target
    """
    if not 0 <= theta < len(params.targets):
        raise ValueError(f"target index {theta} out of range")
    slate = draw_slate(state, params, rng)
    chosen = user_choice(slate, params.targets[theta], params.lambda_, rng)
    v = float(slate[chosen])
    p_next, reward = consume(np.array([state.p]), np.array([v]), params, rng)
    return SlateState(p=float(p_next[0]), last_kaleness=v), float(reward[0])


def observe(
    state: SlateState,
    model: ObservationModel,
    params: SlateParams,
    rng: np.random.Generator,
) -> int:
    """Observation bucket of the corrupted satisfaction, as in the binary model."""
    s = satisfaction(state.p, params.ck.tau)
    return int(observe_satisfaction(s, model, rng)[0])


class SlateEnv:
    """Batched slate simulator with the same interface as ``ChocKaleEnv``."""

    def __init__(self, params: SlateParams, model: ObservationModel):
        self.params = params
        self.model = model
        self.p = np.zeros(1)
        self.last_kaleness = np.full(1, 0.5)
        self.events = 0

    @property
    def n_actions(self) -> int:
        return len(self.params.targets)

    @property
    def n_observations(self) -> int:
        return self.model.n_buckets

    @property
    def action_kaleness(self) -> np.ndarray:
        return np.asarray(self.params.targets, dtype=float)

    def satisfaction(self) -> np.ndarray:
        return satisfaction(self.p, self.params.ck.tau)

    def reset(
        self,
        rng: np.random.Generator,
        n: int = 1,
        p0: float = 0.0,
        kaleness0: float = 0.5,
    ) -> np.ndarray:
        """Start ``n`` users at ``(p0, kaleness0)`` and return their observations."""
        self.p = np.full(n, float(p0))
        self.last_kaleness = np.full(n, float(kaleness0))
        self.events = 0
        return observe_satisfaction(self.satisfaction(), self.model, rng)

    def step(self, actions, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Apply one target index per user; returns (observation buckets, rewards)."""
        actions = np.broadcast_to(np.asarray(actions, dtype=np.int64), self.p.shape)
        slates = draw_slates(self.last_kaleness, self.params, rng)
        theta = self.action_kaleness[actions]
        probabilities = choice_probabilities(slates, theta, self.params.lambda_)
        chosen = sample_choices(probabilities, rng)
        v = slates[np.arange(slates.shape[0]), chosen]
        self.p, rewards = consume(self.p, v, self.params, rng)
        self.last_kaleness = v
        self.events += 1
        observation = observe_satisfaction(self.satisfaction(), self.model, rng)
        return observation, np.atleast_1d(rewards)
