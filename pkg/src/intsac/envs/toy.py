"""Tiny envs with closed-form optima, used as oracles."""

from __future__ import annotations

import numpy as np

from ..integer_reparam import IntegerActionSpec, embed
from .base import Env, EnvStep


class IntegerBandit(Env):
    """Single state, one integer action with N values, one step per episode.

    reward(a) = -(T(a) - T(best))^2 with T the [-1, 1] embedding, so ``best``
    is the unique optimum.
    """

    obs_dim = 1

    def __init__(self, bins: int = 9, best: int = 6, seed=None):
        super().__init__(seed)
        if not 0 <= best < bins:
            raise ValueError("best arm outside the action range")
        self.bins = bins
        self.best = best
        self.action_spec = IntegerActionSpec((bins,), (True,))

    def reward(self, a: int) -> float:
        return -float((embed(a, self.bins) - embed(self.best, self.bins)) ** 2)

    def reset(self, seed=None):
        self._reseed(seed)
        self._done = False
        return np.ones(1)

    def step(self, action) -> EnvStep:
        self._check_step()
        a = self._check_indices(action)
        self._done = True
        return EnvStep(np.ones(1), self.reward(int(a[0])), True, {})


class TwoStateMDP(Env):
    """Deterministic 2-state, 2-action MDP with one-hot observations.

    ``next_state[s][a]`` and ``rewards[s][a]`` define the dynamics.  Episodes
    are cut (truncated) after ``horizon`` steps.
    """

    obs_dim = 2

    def __init__(self, next_state=((0, 1), (0, 1)), rewards=((1.0, 0.0), (0.5, 2.0)), horizon=50, seed=None):
        super().__init__(seed)
        self.next_state = np.array(next_state, dtype=int)
        self.rewards = np.array(rewards, dtype=float)
        self.horizon = horizon
        self.action_spec = IntegerActionSpec((2,), (True,))
        self.state = 0
        self.t = 0

    @staticmethod
    def one_hot(s: int) -> np.ndarray:
        o = np.zeros(2)
        o[s] = 1.0
        return o

    def reset(self, seed=None):
        self._reseed(seed)
        self.state = int(self._rng.integers(2))
        self.t = 0
        self._done = False
        return self.one_hot(self.state)

    def step(self, action) -> EnvStep:
        self._check_step()
        a = int(self._check_indices(action)[0])
        r = float(self.rewards[self.state, a])
        self.state = int(self.next_state[self.state, a])
        self.t += 1
        self._done = self.t >= self.horizon
        info = {"truncated": True} if self._done else {}
        return EnvStep(self.one_hot(self.state), r, self._done, info)
