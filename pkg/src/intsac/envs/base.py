"""Shared environment plumbing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EnvStep:
    obs: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class EnvError(RuntimeError):
    """Illegal use of an environment (bad action, step after done)."""


class Env:
    """Gym-style base: ``reset(seed) -> obs``, ``step(action) -> EnvStep``.

    Subclasses set ``obs_dim`` and either ``action_spec`` (integer actions)
    or ``action_dim`` (continuous actions in [-1, 1]).  Episodes that end on
    a time limit with a time-unaware observation report
    ``info["truncated"] = True``.
    """

    obs_dim: int
    action_spec = None
    action_dim: int | None = None

    def __init__(self, seed: int | None = None):
        self._rng = np.random.default_rng(seed)
        self._done = True

    @property
    def is_integer(self) -> bool:
        return self.action_spec is not None

    def _reseed(self, seed):
        if seed is not None:
            self._rng = np.random.default_rng(seed)

    def _check_step(self):
        if self._done:
            raise EnvError("step() called on a finished episode; call reset() first")

    def _check_indices(self, action) -> np.ndarray:
        a = np.asarray(action)
        if a.shape != (self.action_spec.dims,):
            raise EnvError(f"expected {self.action_spec.dims} integer actions, got shape {a.shape}")
        if not np.all(np.equal(np.mod(a, 1), 0)):
            raise EnvError(f"non-integer action {a}")
        a = a.astype(np.int64)
        if not self.action_spec.contains(a):
            raise EnvError(f"action {a.tolist()} outside ranges {self.action_spec.bins}")
        return a

    def sample_action(self, rng: np.random.Generator) -> np.ndarray:
        """Uniformly random action from the action space."""
        if self.is_integer:
            return rng.integers(0, np.array(self.action_spec.bins))
        return rng.uniform(-1.0, 1.0, self.action_dim)


def random_policy_return(env: Env, episodes: int, seed: int) -> float:
    """Mean undiscounted return of the uniform random policy."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    env.reset(seed=seed)
    for ep in range(episodes):
        if ep:
            env.reset()
        done = False
        while not done:
            step = env.step(env.sample_action(rng))
            total += step.reward
            done = step.done
    return total / episodes
