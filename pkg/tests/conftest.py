"""Common test fixtures for the advamp test suite."""

import numpy as np
import pytest

from advamp.analysis.verify import random_mdp
from advamp.envs.choc_kale import CKParams
from advamp.mdp.models import FiniteMDP


class ConstantEnv:
    """Single-bucket environment paying a fixed reward per action."""

    n_observations = 1

    def __init__(self, rewards=(1.0, 1.0)):
        self.rewards = np.asarray(rewards, dtype=float)
        self.n_actions = len(rewards)
        self.events = 0
        self.actions = []

    def reset(self, rng, n=1):
        self.events = 0
        return np.zeros(n, dtype=np.int64)

    def step(self, actions, rng):
        actions = np.atleast_1d(np.asarray(actions, dtype=np.int64))
        self.actions.append(actions.copy())
        self.events += 1
        return np.zeros(actions.shape, dtype=np.int64), self.rewards[actions]


@pytest.fixture
def rng():
    """Return a seeded generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def ck_params():
    """Return the default Choc-Kale parameters."""
    return CKParams()


@pytest.fixture
def noiseless_ck_params():
    """Return Choc-Kale parameters with deterministic engagement."""
    return CKParams(sigma_choc=0.0, sigma_kale=0.0)


@pytest.fixture
def constant_env():
    """Return a factory of single-bucket environments."""
    return ConstantEnv


@pytest.fixture
def make_random_mdp():
    """Return a factory of seeded dense random MDPs."""

    def factory(n_states=4, n_actions=3, gamma=0.9, seed=0):
        return random_mdp(np.random.default_rng(seed), n_states, n_actions, gamma)

    return factory


@pytest.fixture
def single_state_mdp():
    """One state, two actions paying 1 and 0, discount 0.5."""
    return FiniteMDP(
        transition=np.ones((1, 2, 1)), reward=[[1.0, 0.0]], discount=0.5
    )


@pytest.fixture
def two_state_mdp():
    """
    Deterministic two-state MDP.

    Action 0 stays put and action 1 moves to the other state; staying in
    state 1 pays 1, everything else pays 0.
    """
    transition = np.zeros((2, 2, 2))
    transition[0, 0, 0] = 1.0
    transition[0, 1, 1] = 1.0
    transition[1, 0, 1] = 1.0
    transition[1, 1, 0] = 1.0
    reward = np.array([[0.0, 0.0], [1.0, 0.0]])
    return FiniteMDP(transition=transition, reward=reward, discount=0.9)
