"""Experiment configuration: JSON in, validated dataclass out."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

AGENTS = ("sac_continuous", "sac_integer", "ppo_integer", "random")
ENVS = ("point_reach", "voltvar13", "bandit", "two_state")

# Fixed entropy temperatures per robot task; the point-reach env stands in
# for Reacher.  The Volt-Var value is our own choice.
TEMPERATURES = {
    "reacher": 0.005,
    "hopper": 0.05,
    "halfcheetah": 0.02,
    "walker2d": 0.06,
}
DEFAULT_ALPHA = {
    "point_reach": TEMPERATURES["reacher"],
    "voltvar13": 0.05,
    "bandit": TEMPERATURES["reacher"],
    "two_state": 0.0,
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class TrainConfig:
    """Everything needed to reproduce a run.

    ``alpha=None`` resolves to the env default above.  ``bins`` sets the
    per-dimension discretization when an integer agent drives a continuous
    env.  Network sizes, optimizer and schedule defaults are conventional
    SAC/PPO settings, not values taken from any experiment.
    """

    env: str = "point_reach"
    agent: str = "sac_integer"
    env_params: dict = field(default_factory=dict)
    bins: int = 9
    alpha: float | None = None
    gamma: float = 0.99
    polyak: float = 0.005
    tau: float = 1.0
    exact_entropy: bool = False
    hidden: list[int] = field(default_factory=lambda: [256, 256])
    lr: float = 3e-4
    batch_size: int = 256
    buffer_size: int = 100_000
    warmup_steps: int = 1000
    update_every: int = 1
    total_steps: int = 100_000
    eval_interval: int = 5000
    eval_episodes: int = 10
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    out_dir: str = "runs/default"
    # PPO
    clip: float = 0.2
    epochs: int = 10
    gae_lambda: float = 0.95
    rollout_steps: int = 2048
    minibatch: int = 64
    ent_coef: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown key")
        cfg = cls(**d)
        cfg.validate()
        return cfg.resolved()

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"not valid JSON ({e})") from None
        if not isinstance(d, dict):
            raise ConfigError("<file>", "top level must be a JSON object")
        return cls.from_dict(d)

    def resolved(self) -> "TrainConfig":
        out = dataclasses.replace(self)
        if out.alpha is None:
            out.alpha = DEFAULT_ALPHA[out.env]
        out.hidden = [int(h) for h in out.hidden]
        out.seeds = [int(s) for s in out.seeds]
        out.env_params = dict(out.env_params)
        return out

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(name, msg)

        def is_int(x):
            return isinstance(x, int) and not isinstance(x, bool)

        def is_num(x):
            return isinstance(x, (int, float)) and not isinstance(x, bool)

        need(self.env in ENVS, "env", f"must be one of {ENVS}")
        need(self.agent in AGENTS, "agent", f"must be one of {AGENTS}")
        need(isinstance(self.env_params, dict), "env_params", "must be an object")
        need(not (self.agent == "sac_continuous" and self.env != "point_reach"), "agent",
             "sac_continuous needs a continuous env (point_reach)")
        need(is_int(self.bins) and self.bins >= 2, "bins", "must be an integer >= 2")
        need(self.alpha is None or (is_num(self.alpha) and self.alpha >= 0), "alpha", "must be >= 0")
        need(is_num(self.gamma) and 0 <= self.gamma < 1, "gamma", "must lie in [0, 1)")
        need(is_num(self.polyak) and 0 < self.polyak <= 1, "polyak", "must lie in (0, 1]")
        need(is_num(self.tau) and self.tau > 0, "tau", "must be > 0")
        need(isinstance(self.exact_entropy, bool), "exact_entropy", "must be a boolean")
        need(isinstance(self.hidden, list) and self.hidden and all(is_int(h) and h > 0 for h in self.hidden),
             "hidden", "must be a non-empty list of positive integers")
        need(is_num(self.lr) and self.lr > 0, "lr", "must be > 0")
        for name in ("batch_size", "buffer_size", "update_every", "total_steps", "eval_interval",
                     "eval_episodes", "epochs", "rollout_steps", "minibatch"):
            val = getattr(self, name)
            need(is_int(val) and val >= 1, name, "must be a positive integer")
        need(is_int(self.warmup_steps) and self.warmup_steps >= 0, "warmup_steps", "must be >= 0")
        need(isinstance(self.seeds, list) and self.seeds and all(is_int(s) for s in self.seeds),
             "seeds", "must be a non-empty list of integers")
        need(isinstance(self.out_dir, str) and self.out_dir, "out_dir", "must be a path string")
        need(is_num(self.clip) and self.clip >= 0, "clip", "must be >= 0")
        need(is_num(self.gae_lambda) and 0 <= self.gae_lambda <= 1, "gae_lambda", "must lie in [0, 1]")
        need(is_num(self.ent_coef) and self.ent_coef >= 0, "ent_coef", "must be >= 0")
