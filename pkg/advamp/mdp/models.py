"""
advamp.mdp.models
~~~~~~~~~~~~~~~~~

Pydantic V2 models for explicit tabular MDPs and the tables derived from them.

All array fields are copied on construction and marked read-only, so model
instances can be shared between worker processes and solver calls without
defensive copies.

Usage:
    from advamp.mdp.models import FiniteMDP

    mdp = FiniteMDP(transition=p, reward=r, discount=0.95)
    document = mdp.to_json_dict()
"""

from typing import Any, Dict

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

PROBABILITY_ATOL = 1e-9


def _frozen_array(value: Any, dtype) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class FiniteMDP(BaseModel):
    """
    Explicit tabular MDP: transition tensor ``(S, A, S)``, expected reward
    table ``(S, A)`` and discount in ``[0, 1)``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    transition: np.ndarray
    reward: np.ndarray
    discount: float

    @field_validator("transition", mode="before")
    @classmethod
    def validate_transition(cls, v):
        """
        Validate that every (state, action) row is a probability vector.

        Raises:
            ValueError: If the tensor is not ``(S, A, S)`` or a row is not a
                distribution within 1e-9
        """
        array = _frozen_array(v, float)
        if array.ndim != 3 or array.shape[0] != array.shape[2]:
            raise ValueError(
                f"transition must have shape (S, A, S), got {array.shape}"
            )
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ValueError("transition needs at least one state and one action")
        if not np.all(np.isfinite(array)) or np.any(array < 0):
            raise ValueError("transition probabilities must be finite and nonnegative")
        row_sums = array.sum(axis=2)
        if not np.allclose(row_sums, 1.0, rtol=0.0, atol=PROBABILITY_ATOL):
            worst = float(np.max(np.abs(row_sums - 1.0)))
            raise ValueError(
                f"transition rows must sum to 1 (max deviation {worst:.3e})"
            )
        return array

    @field_validator("reward", mode="before")
    @classmethod
    def validate_reward(cls, v):
        array = _frozen_array(v, float)
        if array.ndim != 2:
            raise ValueError(f"reward must have shape (S, A), got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("reward values must be finite")
        return array

    @field_validator("discount")
    @classmethod
    def validate_discount(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {v}")
        return float(v)

    @model_validator(mode="after")
    def validate_shapes(self):
        if self.reward.shape != self.transition.shape[:2]:
            raise ValueError(
                f"reward shape {self.reward.shape} does not match transition "
                f"shape {self.transition.shape}"
            )
        return self

    @property
    def n_states(self) -> int:
        return int(self.transition.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.transition.shape[1])

    @property
    def r_max(self) -> float:
        """Largest absolute expected reward."""
        return float(np.max(np.abs(self.reward)))

    def to_json_dict(self) -> Dict[str, Any]:
        """Serialize to ``{n_states, n_actions, gamma, transition, reward}``."""
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.discount,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> "FiniteMDP":
        """
        Build a FiniteMDP from its JSON document, validating probabilities.

        Raises:
            ValueError: If the declared sizes disagree with the arrays or the
                arrays fail validation
        """
        mdp = cls(
            transition=data["transition"],
            reward=data["reward"],
            discount=data["gamma"],
        )
        if (mdp.n_states, mdp.n_actions) != (data["n_states"], data["n_actions"]):
            raise ValueError(
                f"declared size ({data['n_states']}, {data['n_actions']}) does not "
                f"match arrays ({mdp.n_states}, {mdp.n_actions})"
            )
        return mdp


class QTable(BaseModel):
    """State x action table of finite values."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v):
        array = _frozen_array(v, float)
        if array.ndim != 2 or array.shape[1] < 1:
            raise ValueError(f"values must have shape (S, A), got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("Q-values must be finite")
        return array

    @property
    def n_states(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.values.shape[1])

    def state_values(self) -> np.ndarray:
        """Return ``V(s) = max_a Q(s, a)``."""
        return self.values.max(axis=1)

    def check_matches(self, mdp: FiniteMDP) -> None:
        """Raise ValueError unless the table has the MDP's dimensions."""
        if self.values.shape != (mdp.n_states, mdp.n_actions):
            raise ValueError(
                f"Q-table shape {self.values.shape} does not match MDP "
                f"({mdp.n_states}, {mdp.n_actions})"
            )


class DeterministicPolicy(BaseModel):
    """Total mapping from state index to action index."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    action_of: np.ndarray
    n_actions: int

    @field_validator("action_of", mode="before")
    @classmethod
    def validate_action_of(cls, v):
        array = _frozen_array(v, np.int64)
        if array.ndim != 1:
            raise ValueError("action_of must be one action index per state")
        if np.any(array < 0):
            raise ValueError("action indices must be nonnegative")
        return array

    @model_validator(mode="after")
    def validate_range(self):
        if self.n_actions < 1:
            raise ValueError("n_actions must be positive")
        if self.action_of.size and int(self.action_of.max()) >= self.n_actions:
            raise ValueError(
                f"action index {int(self.action_of.max())} out of range for "
                f"{self.n_actions} actions"
            )
        return self

    @property
    def n_states(self) -> int:
        return int(self.action_of.shape[0])


class AdvantageProfile(BaseModel):
    """Per-state best action, second-best action and their Q-value gap."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    best_action: np.ndarray
    second_action: np.ndarray
    advantage: np.ndarray

    @field_validator("best_action", "second_action", mode="before")
    @classmethod
    def validate_actions(cls, v):
        return _frozen_array(v, np.int64)

    @field_validator("advantage", mode="before")
    @classmethod
    def validate_advantage(cls, v):
        array = _frozen_array(v, float)
        if np.any(array < 0):
            raise ValueError("advantages must be nonnegative")
        return array

    @model_validator(mode="after")
    def validate_distinct(self):
        if np.any(self.best_action == self.second_action):
            raise ValueError("best and second-best actions must differ")
        return self
