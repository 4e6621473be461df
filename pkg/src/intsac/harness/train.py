"""Seeded training runs: one JSONL metrics stream and one checkpoint per seed.

Run directory layout::

    <out_dir>/config.json             resolved config (every default filled in)
    <out_dir>/seed_<s>/metrics.jsonl  one record per evaluation point
    <out_dir>/seed_<s>/checkpoint.json

A record holds ``step``, ``eval_return``, ``train_return`` (mean over
episodes finished since the previous record), the latest losses, an
entropy estimate, ``seed`` and ``wall_clock``.  Only ``wall_clock`` varies
between reruns of the same config and seed.
"""

from __future__ import annotations

import json
import logging
import math
import time
from pathlib import Path

import numpy as np

from ..distributions import RngStream
from ..envs import DiscretizedWrapper, IntegerBandit, PointReachEnv, TwoStateMDP, VoltVarToyEnv
from ..integer_reparam import critic_input
from ..ppo import PpoAgent, PpoConfig, RolloutBatch, gae_advantages
from ..sac import CONTINUOUS, INTEGER, ReplayBuffer, SacAgent, SacConfig
from .config import TrainConfig

log = logging.getLogger(__name__)

WALL_CLOCK = "wall_clock"
EVAL_SEED_BASE = 1_000_003


class NumericError(RuntimeError):
    """A loss went non-finite."""


def make_env(cfg: TrainConfig, seed: int | None = None):
    params = dict(cfg.env_params)
    if cfg.env == "point_reach":
        env = PointReachEnv(seed=seed, **params)
        if cfg.agent in ("sac_integer", "ppo_integer"):
            env = DiscretizedWrapper(env, cfg.bins)
        return env
    if cfg.env == "voltvar13":
        return VoltVarToyEnv(seed=seed, **params)
    if cfg.env == "bandit":
        return IntegerBandit(seed=seed, **params)
    if cfg.env == "two_state":
        return TwoStateMDP(seed=seed, **params)
    raise ValueError(f"unknown env {cfg.env!r}")


def sac_config(cfg: TrainConfig) -> SacConfig:
    return SacConfig(
        alpha=cfg.alpha,
        gamma=cfg.gamma,
        polyak=cfg.polyak,
        tau=cfg.tau,
        hidden=tuple(cfg.hidden),
        lr=cfg.lr,
        batch_size=cfg.batch_size,
        exact_entropy=cfg.exact_entropy,
    )


def ppo_config(cfg: TrainConfig) -> PpoConfig:
    return PpoConfig(
        gamma=cfg.gamma,
        gae_lambda=cfg.gae_lambda,
        clip=cfg.clip,
        epochs=cfg.epochs,
        rollout_steps=cfg.rollout_steps,
        minibatch=cfg.minibatch,
        lr=cfg.lr,
        hidden=tuple(cfg.hidden),
        ent_coef=cfg.ent_coef,
    )


def make_agent(cfg: TrainConfig, env, rng: RngStream):
    if cfg.agent == "sac_integer":
        if not env.is_integer:
            raise ValueError("sac_integer needs an integer action env")
        return SacAgent(env.obs_dim, INTEGER, sac_config(cfg), rng, spec=env.action_spec)
    if cfg.agent == "sac_continuous":
        if env.is_integer:
            raise ValueError("sac_continuous needs a continuous action env")
        return SacAgent(env.obs_dim, CONTINUOUS, sac_config(cfg), rng, action_dim=env.action_dim)
    if cfg.agent == "ppo_integer":
        return PpoAgent(env.obs_dim, env.action_spec, ppo_config(cfg), rng)
    return None


class RandomAgent:
    """Uniform random actions; the reference policy."""

    def __init__(self, env, rng: RngStream):
        self.env = env
        self.rng = rng

    def act(self, obs, deterministic=False, rng=None):
        a = self.env.sample_action(self.rng.gen)
        return a, a


def _env_action(agent, obs, deterministic, rng=None):
    return agent.act(obs, deterministic, rng)[0]


def evaluate(agent, env, episodes: int, seed: int, deterministic: bool = True) -> float:
    """Mean undiscounted return over ``episodes`` with fixed per-episode seeds."""
    total = 0.0
    for ep in range(episodes):
        obs = env.reset(seed=EVAL_SEED_BASE * (seed + 1) + ep)
        done = False
        while not done:
            step = env.step(_env_action(agent, obs, deterministic))
            total += step.reward
            obs = step.obs
            done = step.done
    return total / episodes


def _finite(*xs) -> bool:
    return all(x is None or math.isfinite(x) for x in xs)


class MetricsWriter:
    def __init__(self, path: Path, seed: int):
        self.path = path
        self.seed = seed
        self.fh = path.open("w")
        self.t0 = time.perf_counter()

    def write(self, record: dict):
        record = {**record, "seed": self.seed, WALL_CLOCK: round(time.perf_counter() - self.t0, 3)}
        self.fh.write(json.dumps(record, sort_keys=True) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


def _abort(writer: MetricsWriter, step: int, losses: dict):
    writer.write({"step": step, "error": "non_finite_loss", **{k: repr(v) for k, v in losses.items()}})
    writer.close()
    raise NumericError(f"non-finite loss at step {step}: {losses}")


def _mean_or_none(xs):
    return float(np.mean(xs)) if xs else None


def run_seed(cfg: TrainConfig, seed: int, out: Path) -> Path:
    """Train one seed; returns the seed directory."""
    out.mkdir(parents=True, exist_ok=True)
    root = RngStream(seed)
    env = make_env(cfg, seed)
    eval_env = make_env(cfg, seed + 7919)
    writer = MetricsWriter(out / "metrics.jsonl", seed)
    try:
        if cfg.agent == "random":
            _run_random(cfg, seed, env, eval_env, root, writer)
            agent = None
        elif cfg.agent == "ppo_integer":
            agent = make_agent(cfg, env, root.child(0))
            _run_ppo(cfg, seed, agent, env, eval_env, writer)
        else:
            agent = make_agent(cfg, env, root.child(0))
            _run_sac(cfg, seed, agent, env, eval_env, root, writer)
    finally:
        if not writer.fh.closed:
            writer.close()
    if agent is not None:
        agent.save(out / "checkpoint.json", {"train_config": cfg.to_dict(), "seed": seed})
    return out


def _eval_points(cfg: TrainConfig) -> set[int]:
    pts = set(range(cfg.eval_interval, cfg.total_steps + 1, cfg.eval_interval))
    pts.add(cfg.total_steps)
    return pts


def _run_random(cfg, seed, env, eval_env, root, writer):
    agent = RandomAgent(eval_env, root.child(2))
    for step in [0, *sorted(_eval_points(cfg))]:
        ret = evaluate(agent, eval_env, cfg.eval_episodes, seed, deterministic=False)
        writer.write({"step": step, "eval_return": ret})


def _run_sac(cfg, seed, agent: SacAgent, env, eval_env, root, writer):
    buffer = ReplayBuffer(cfg.buffer_size, env.obs_dim, agent.action_dim, root.child(1))
    explore = root.child(2)
    points = _eval_points(cfg)
    writer.write({"step": 0, "eval_return": evaluate(agent, eval_env, cfg.eval_episodes, seed)})
    obs = env.reset(seed=seed)
    ep_ret, returns = 0.0, []
    last = {"loss_q1": None, "loss_q2": None, "loss_pi": None}
    for step in range(1, cfg.total_steps + 1):
        if step <= cfg.warmup_steps:
            a_env = env.sample_action(explore.gen)
            a_critic = critic_input(a_env, env.action_spec) if env.is_integer else a_env
        else:
            a_env, a_critic = agent.act(obs, rng=explore)
        res = env.step(a_env)
        terminal = res.done and not res.info.get("truncated", False)
        indices = a_env if env.is_integer else np.zeros(agent.action_dim, dtype=np.int64)
        buffer.add(obs, indices, a_critic, res.reward, res.obs, terminal)
        ep_ret += res.reward
        obs = res.obs
        if res.done:
            returns.append(ep_ret)
            ep_ret = 0.0
            obs = env.reset()
        if step > cfg.warmup_steps and step % cfg.update_every == 0:
            info = agent.update(buffer.sample(cfg.batch_size))
            last = {"loss_q1": info.loss_q1, "loss_q2": info.loss_q2, "loss_pi": info.loss_pi}
            if not _finite(*last.values()):
                _abort(writer, step, last)
        if step in points:
            batch_obs = buffer.sample(min(cfg.batch_size, len(buffer))).obs
            writer.write(
                {
                    "step": step,
                    "eval_return": evaluate(agent, eval_env, cfg.eval_episodes, seed),
                    "train_return": _mean_or_none(returns),
                    "entropy": agent.entropy(batch_obs),
                    **last,
                }
            )
            returns = []


def _run_ppo(cfg, seed, agent: PpoAgent, env, eval_env, writer):
    points = _eval_points(cfg)
    writer.write({"step": 0, "eval_return": evaluate(agent, eval_env, cfg.eval_episodes, seed)})
    obs = env.reset(seed=seed)
    ep_ret, returns = 0.0, []
    last = {"loss_pi": None, "loss_v": None}
    step = 0
    k = env.action_spec.dims
    while step < cfg.total_steps:
        n = min(cfg.rollout_steps, cfg.total_steps - step)
        cols = {name: [] for name in ("obs", "idx", "logp", "rew", "val", "next_obs", "done", "end")}
        pending = []
        for _ in range(n):
            idx, logp, v = agent.act(obs)
            res = env.step(idx)
            step += 1
            terminal = res.done and not res.info.get("truncated", False)
            for name, val in zip(cols, (obs, idx, logp, res.reward, v, res.obs, terminal, res.done)):
                cols[name].append(val)
            ep_ret += res.reward
            obs = res.obs
            if res.done:
                returns.append(ep_ret)
                ep_ret = 0.0
                obs = env.reset()
            if step in points:
                pending.append(step)
        batch = RolloutBatch(
            obs=np.array(cols["obs"]),
            indices=np.array(cols["idx"], dtype=np.int64).reshape(-1, k),
            log_prob_old=np.array(cols["logp"]),
            rewards=np.array(cols["rew"], dtype=float),
            values=np.array(cols["val"]),
            next_values=agent.values(np.array(cols["next_obs"])),
            dones=np.array(cols["done"], dtype=float),
            ends=np.array(cols["end"], dtype=float),
        )
        # the rollout cut is an episode boundary for the recursion, bootstrapped by next_values
        batch.ends[-1] = 1.0
        gae_advantages(batch, cfg.gamma, cfg.gae_lambda)
        lpi, lv = agent.ppo_update(batch)
        last = {"loss_pi": lpi, "loss_v": lv}
        if not _finite(lpi, lv):
            _abort(writer, step, last)
        for p in pending:
            writer.write(
                {
                    "step": p,
                    "eval_return": evaluate(agent, eval_env, cfg.eval_episodes, seed),
                    "train_return": _mean_or_none(returns),
                    "entropy": agent.entropy(batch.obs[: cfg.minibatch]),
                    **last,
                }
            )
            returns = []


def run(cfg: TrainConfig, seeds: list[int] | None = None, out_dir: str | Path | None = None) -> list[Path]:
    """Train every seed of ``cfg``; returns the seed directories."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(seeds if seeds is not None else cfg.seeds)
    resolved = {**cfg.to_dict(), "seeds": seeds, "out_dir": str(out)}
    (out / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    dirs = []
    for seed in seeds:
        log.info("training %s on %s, seed %d", cfg.agent, cfg.env, seed)
        dirs.append(run_seed(cfg, seed, out / f"seed_{seed}"))
    return dirs


def load_metrics(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]
