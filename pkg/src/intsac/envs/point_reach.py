"""2-D point mass driven to a random target, and its integer discretization."""

from __future__ import annotations

import numpy as np

from ..integer_reparam import IntegerActionSpec, embed
from .base import Env, EnvStep


class PointReachEnv(Env):
    """Point mass in the plane; the action is an acceleration in [-1, 1]^2.

    obs = (position, velocity, target - position).  Reward per step is
    ``-|pos - target| - 0.1 |a|^2``.  Episodes last ``horizon`` steps and end
    by truncation.
    """

    obs_dim = 6
    action_dim = 2

    def __init__(self, seed=None, horizon=150, dt=0.05, damping=0.1, bound=2.0, target_range=1.0):
        super().__init__(seed)
        self.horizon = horizon
        self.dt = dt
        self.damping = damping
        self.bound = bound
        self.target_range = target_range
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)
        self.target = np.zeros(2)
        self.t = 0

    def _obs(self):
        return np.concatenate([self.pos, self.vel, self.target - self.pos])

    def reset(self, seed=None):
        self._reseed(seed)
        r = self.target_range
        self.pos = self._rng.uniform(-r, r, 2)
        self.vel = np.zeros(2)
        self.target = self._rng.uniform(-r, r, 2)
        self.t = 0
        self._done = False
        return self._obs()

    def set_state(self, pos, vel, target):
        self.pos = np.asarray(pos, dtype=float).copy()
        self.vel = np.asarray(vel, dtype=float).copy()
        self.target = np.asarray(target, dtype=float).copy()

    def step(self, action) -> EnvStep:
        self._check_step()
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        self.vel = self.vel + self.dt * (a - self.damping * self.vel)
        pos = self.pos + self.dt * self.vel
        hit = np.abs(pos) > self.bound
        self.pos = np.clip(pos, -self.bound, self.bound)
        self.vel = np.where(hit, 0.0, self.vel)
        self.t += 1
        dist = float(np.linalg.norm(self.pos - self.target))
        reward = -dist - 0.1 * float(a @ a)
        self._done = self.t >= self.horizon
        info = {"distance": dist}
        if self._done:
            info["truncated"] = True
        return EnvStep(self._obs(), reward, self._done, info)


class DiscretizedWrapper(Env):
    """Integer-action view of a continuous env: index a -> 2a/(N-1) - 1 per dimension."""

    def __init__(self, inner: Env, bins: int):
        self.inner = inner
        self.bins = int(bins)
        self.obs_dim = inner.obs_dim
        self.action_spec = IntegerActionSpec.uniform(inner.action_dim, self.bins, embed=True)

    @property
    def _done(self):
        return self.inner._done

    def reset(self, seed=None):
        return self.inner.reset(seed)

    def to_continuous(self, indices) -> np.ndarray:
        return embed(np.asarray(indices), self.bins)

    def step(self, action) -> EnvStep:
        self._check_step()
        idx = self._check_indices(action)
        return self.inner.step(self.to_continuous(idx))
