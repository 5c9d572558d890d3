"""
advamp.envs.choc_kale
~~~~~~~~~~~~~~~~~~~~~

The Choc-Kale user simulator.

A user's latent net positive exposure ``p`` moves as ``p ← βp + 1`` after a
Kale recommendation and ``p ← βp − 1`` after Choc; satisfaction is the
sigmoid ``s = 1/(1 + e^{−τp})`` and engagement is drawn from
``N(s·μ_a, σ_a²)`` using the satisfaction before the move. The learner only
sees ``s`` corrupted by truncated Gaussian noise and bucketed.

Actions are indexed by their kaleness: Choc is 0 and Kale is 1, so the
exposure increment of any action is ``2·kaleness − 1``. The slate environment
reuses this convention for fractional kaleness scores.
"""

import logging
from enum import IntEnum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import expit

from advamp import settings
from advamp.mdp.models import FiniteMDP

logger = logging.getLogger(__name__)


class Action(IntEnum):
    CHOC = 0
    KALE = 1


class CKParams(BaseModel):
    """Choc-Kale dynamics, engagement model and RL discount."""

    model_config = ConfigDict(frozen=True)

    beta: float = Field(settings.CK_DEFAULTS["beta"], ge=0.0, lt=1.0)
    tau: float = Field(settings.CK_DEFAULTS["tau"], gt=0.0)
    mu_choc: float = Field(settings.CK_DEFAULTS["mu_choc"], gt=0.0)
    mu_kale: float = Field(settings.CK_DEFAULTS["mu_kale"], gt=0.0)
    sigma_choc: float = Field(settings.CK_DEFAULTS["sigma_choc"], ge=0.0)
    sigma_kale: float = Field(settings.CK_DEFAULTS["sigma_kale"], ge=0.0)
    gamma: float = Field(settings.CK_DEFAULTS["gamma"], ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def validate_engagement_order(self):
        if not self.mu_choc > self.mu_kale:
            raise ValueError(
                f"mu_choc ({self.mu_choc}) must exceed mu_kale ({self.mu_kale})"
            )
        return self

    @property
    def p_bound(self) -> float:
        """Fixed point ``1/(1−β)`` of the exposure recursion."""
        return 1.0 / (1.0 - self.beta)

    def mean_scale(self, kaleness):
        """Engagement scale ``μ`` interpolated linearly in kaleness."""
        kaleness = np.asarray(kaleness, dtype=float)
        return kaleness * self.mu_kale + (1.0 - kaleness) * self.mu_choc

    def action_std(self, action):
        """Engagement noise of the binary actions."""
        return np.where(
            np.asarray(action) == Action.KALE, self.sigma_kale, self.sigma_choc
        )


class CKState(BaseModel):
    """Latent net positive exposure."""

    model_config = ConfigDict(frozen=True)

    p: float = 0.0

    @field_validator("p")
    @classmethod
    def validate_p(cls, v):
        if not np.isfinite(v):
            raise ValueError("exposure must be finite")
        return float(v)

    def check_bound(self, params: CKParams) -> None:
        """Raise ValueError if ``p`` lies outside ``[−1/(1−β), 1/(1−β)]``."""
        if abs(self.p) > params.p_bound + 1e-12:
            raise ValueError(f"exposure {self.p} outside ±{params.p_bound}")


class ObservationModel(BaseModel):
    """Truncated Gaussian corruption of satisfaction and its bucketing."""

    model_config = ConfigDict(frozen=True)

    sigma_n: float = Field(0.0, ge=0.0)
    n_buckets: int = Field(settings.DEFAULT_N_BUCKETS, ge=2)


def satisfaction(p, tau: float):
    """Sigmoid satisfaction ``1/(1 + e^{−τp})``; works elementwise on arrays."""
    result = expit(tau * np.asarray(p, dtype=float))
    return float(result) if np.ndim(result) == 0 else result


def next_exposure(p, kaleness, params: CKParams):
    """``βp + (2·kaleness − 1)``, kept inside the closed exposure bound."""
    kaleness = np.asarray(kaleness, dtype=float)
    moved = params.beta * np.asarray(p, dtype=float) + 2.0 * kaleness - 1.0
    return np.clip(moved, -params.p_bound, params.p_bound)


def step(
    state: CKState, action: int, params: CKParams, rng: np.random.Generator
) -> Tuple[CKState, float]:
    """
    Recommend ``action`` to a user in ``state``.

    Args:
        state: Current latent state
        action: ``Action.CHOC`` or ``Action.KALE``
        params: Model parameters
        rng: Seeded generator for the engagement draw

    Returns:
        Tuple of (next state, engagement reward)
    """
    action = Action(action)
    state.check_bound(params)
    s = satisfaction(state.p, params.tau)
    mean = s * float(params.mean_scale(float(action)))
    reward = rng.normal(mean, float(params.action_std(action)))
    p_next = next_exposure(state.p, float(action), params)
    return CKState(p=float(p_next)), float(reward)


def truncated_noise(sigma_n: float, size, rng: np.random.Generator) -> np.ndarray:
    """Draw ``N(0, σ_N²)`` noise truncated to ``[−1, 1]`` by rejection."""
    if sigma_n == 0.0:
        return np.zeros(size)
    noise = rng.normal(0.0, sigma_n, size)
    rejected = np.abs(noise) > 1.0
    while np.any(rejected):
        noise[rejected] = rng.normal(0.0, sigma_n, int(rejected.sum()))
        rejected = np.abs(noise) > 1.0
    return noise


def bucketize(s_tilde, n_buckets: int):
    """Clamp to ``[0, 1]`` and map to ``min(floor(s̃·n), n − 1)``."""
    clamped = np.clip(np.asarray(s_tilde, dtype=float), 0.0, 1.0)
    return np.minimum(np.floor(clamped * n_buckets), n_buckets - 1).astype(np.int64)


def observe_satisfaction(
    s, model: ObservationModel, rng: np.random.Generator
) -> np.ndarray:
    """Corrupt an array of satisfaction levels and bucket them."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return bucketize(s + truncated_noise(model.sigma_n, s.shape, rng), model.n_buckets)


def observe(
    state: CKState, model: ObservationModel, params: CKParams, rng: np.random.Generator
) -> int:
    """Observation bucket of the corrupted satisfaction of ``state``."""
    s = satisfaction(state.p, params.tau)
    return int(observe_satisfaction(s, model, rng)[0])


def exposure_grid(params: CKParams, n_buckets: int) -> np.ndarray:
    """Uniform grid of ``n_buckets`` points over ``[−1/(1−β), 1/(1−β)]``."""
    return np.linspace(-params.p_bound, params.p_bound, n_buckets)


def grid_position(p, params: CKParams, n_buckets: int) -> np.ndarray:
    """Fractional grid coordinate of each exposure value, clipped to the grid."""
    bound = params.p_bound
    position = (np.asarray(p, dtype=float) + bound) / (2.0 * bound) * (n_buckets - 1)
    return np.clip(position, 0.0, n_buckets - 1)


def snap_to_grid(p, params: CKParams, n_buckets: int) -> np.ndarray:
    """Index of the grid point nearest to each exposure value."""
    return np.rint(grid_position(p, params, n_buckets)).astype(np.int64)


def interpolation_weights(
    p, params: CKParams, n_buckets: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lower neighbouring grid index of each exposure value and the weight of
    the upper neighbour, so that ``p = (1−w)·grid[l] + w·grid[l+1]``.
    """
    position = grid_position(p, params, n_buckets)
    lower = np.minimum(np.floor(position), n_buckets - 2).astype(np.int64)
    return lower, position - lower


DISCRETIZATION_SCHEMES = ("linear", "nearest")


def build_discrete_mdp(
    params: CKParams,
    n_buckets: int = settings.DEFAULT_N_BUCKETS,
    scheme: str = "linear",
) -> FiniteMDP:
    """
    Fully observable discretization of the Choc-Kale model.

    States are grid points in exposure and every action pays expected
    engagement ``s(p)·μ_a``. With ``scheme="linear"`` the successor
    ``βp ± 1`` is split between its two neighbouring grid points in
    proportion to its distance from each, so the kernel has the exposure
    recursion's mean. With ``scheme="nearest"`` the successor snaps to the
    nearest grid point with probability 1; snapping biases the drift near
    the crossover and produces spurious Kale/Choc sign changes.

    Raises:
        ValueError: If ``n_buckets < 2`` or the scheme is unknown
    """
    if n_buckets < 2:
        raise ValueError(f"n_buckets must be at least 2, got {n_buckets}")
    if scheme not in DISCRETIZATION_SCHEMES:
        raise ValueError(
            f"unknown discretization scheme {scheme!r}; "
            f"expected one of {', '.join(DISCRETIZATION_SCHEMES)}"
        )
    grid = exposure_grid(params, n_buckets)
    s = satisfaction(grid, params.tau)
    transition = np.zeros((n_buckets, len(Action), n_buckets))
    reward = np.empty((n_buckets, len(Action)))
    rows = np.arange(n_buckets)
    for action in Action:
        moved = next_exposure(grid, float(action), params)
        if scheme == "nearest":
            transition[rows, action, snap_to_grid(moved, params, n_buckets)] = 1.0
        else:
            lower, weight = interpolation_weights(moved, params, n_buckets)
            np.add.at(transition, (rows, action, lower), 1.0 - weight)
            np.add.at(transition, (rows, action, lower + 1), weight)
        reward[:, action] = s * params.mean_scale(float(action))
    logger.debug(f"Built {scheme} Choc-Kale MDP with {n_buckets} grid points")
    return FiniteMDP(transition=transition, reward=reward, discount=params.gamma)


class ChocKaleEnv:
    """
    Batched Choc-Kale simulator over independent users.

    Training drives a batch of one user; evaluation drives every rollout in
    lockstep. Each ``step`` is one base event for every user in the batch.
    """

    n_actions = len(Action)

    def __init__(self, params: CKParams, model: ObservationModel):
        self.params = params
        self.model = model
        self.p = np.zeros(1)
        self.events = 0

    @property
    def n_observations(self) -> int:
        return self.model.n_buckets

    @property
    def action_kaleness(self) -> np.ndarray:
        return np.array([0.0, 1.0])

    def satisfaction(self) -> np.ndarray:
        return satisfaction(self.p, self.params.tau)

    def reset(
        self, rng: np.random.Generator, n: int = 1, p0: float = 0.0
    ) -> np.ndarray:
        """Start ``n`` users at exposure ``p0`` and return their observations."""
        self.p = np.full(n, float(p0))
        self.events = 0
        return observe_satisfaction(self.satisfaction(), self.model, rng)

    def step(self, actions, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """
        Apply one action per user.

        Returns:
            Tuple of (observation buckets, rewards)
        """
        actions = np.broadcast_to(np.asarray(actions, dtype=np.int64), self.p.shape)
        s = self.satisfaction()
        mean = s * self.params.mean_scale(actions.astype(float))
        rewards = rng.normal(mean, self.params.action_std(actions))
        self.p = next_exposure(self.p, actions.astype(float), self.params)
        self.events += 1
        observation = observe_satisfaction(self.satisfaction(), self.model, rng)
        return observation, np.atleast_1d(rewards)
