"""PPO with a categorical (integer) policy and score-function gradients.

Sampled indices are stored as plain integers; the policy gradient flows only
through ``log pi(indices | s)``, never through the samples themselves.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Mlp, Tensor
from .distributions import RngStream, categorical_entropy, gumbel_max
from .integer_reparam import IntegerActionSpec, greedy_indices, joint_log_prob
from .networks import IntegerActor, load_params, read_checkpoint, save_params


@dataclass
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    epochs: int = 10
    rollout_steps: int = 2048
    minibatch: int = 64
    lr: float = 3e-4
    hidden: tuple[int, ...] = (256, 256)
    ent_coef: float = 0.0
    normalize_advantages: bool = True


@dataclass
class RolloutBatch:
    """Flat on-policy rollout.

    ``next_values[t]`` is V of the observation reached after step t (used for
    bootstrapping), ``dones`` marks true terminals and ``ends`` marks any
    episode boundary (terminal or truncated).
    """

    obs: np.ndarray
    indices: np.ndarray
    log_prob_old: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    next_values: np.ndarray
    dones: np.ndarray
    ends: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self):
        return len(self.rewards)


def gae_advantages(batch: RolloutBatch, gamma: float, lam: float):
    """Fill ``advantages`` and ``returns`` in place (generalized advantage estimation)."""
    r = batch.rewards
    deltas = r + gamma * batch.next_values * (1.0 - batch.dones) - batch.values
    adv = np.zeros_like(r)
    running = 0.0
    for t in range(len(r) - 1, -1, -1):
        running = deltas[t] + gamma * lam * (1.0 - batch.ends[t]) * running
        adv[t] = running
    batch.advantages = adv
    batch.returns = adv + batch.values


def normalize(x: np.ndarray) -> np.ndarray:
    std = x.std()
    return (x - x.mean()) / (std if std > 0 else 1.0)


def clipped_surrogate(log_prob_new: Tensor, log_prob_old: np.ndarray, advantages: np.ndarray, eps: float) -> Tensor:
    """Per-sample min(rho A, clip(rho, 1-eps, 1+eps) A), shape ``[B, 1]``."""
    adv = advantages.reshape(-1, 1)
    ratio = ad.exp(ad.sub(log_prob_new, log_prob_old.reshape(-1, 1)))
    return ad.minimum(ad.mul(ratio, adv), ad.mul(ad.clip(ratio, 1.0 - eps, 1.0 + eps), adv))


class PpoAgent:
    def __init__(self, obs_dim: int, spec: IntegerActionSpec, config: PpoConfig, rng: RngStream):
        self.obs_dim = obs_dim
        self.spec = spec
        self.config = config
        self.actor = IntegerActor(obs_dim, spec, config.hidden, rng.child(0))
        self.value = Mlp([obs_dim, *config.hidden, 1], rng.child(1).gen, activation="tanh", name="value")
        self.actor_opt = Adam(self.actor.parameters(), lr=config.lr)
        self.value_opt = Adam(self.value.parameters(), lr=config.lr)
        self.sample_rng = rng.child(2)
        self.minibatch_rng = rng.child(3)
        self.steps = 0

    def act(self, obs, deterministic: bool = False, rng: RngStream | None = None):
        """Returns ``(indices, log_prob, value)`` for one observation."""
        rng = rng or self.sample_rng
        obs = np.asarray(obs, dtype=np.float64)[None, :]
        with ad.no_grad():
            heads = self.actor(obs)
            if deterministic:
                idx = greedy_indices(heads)
            else:
                idx = np.stack([gumbel_max(h, rng) for h in heads], axis=-1)
            logp = joint_log_prob(heads, idx).data[0, 0]
            v = self.value(obs).data[0, 0]
        return idx[0], float(logp), float(v)

    def values(self, obs) -> np.ndarray:
        with ad.no_grad():
            return self.value(np.atleast_2d(obs)).data[:, 0]

    def policy_loss(self, obs, indices, log_prob_old, advantages) -> Tensor:
        heads = self.actor(obs)
        logp = joint_log_prob(heads, indices)
        surr = clipped_surrogate(logp, log_prob_old, advantages, self.config.clip)
        loss = ad.neg(ad.mean(surr))
        if self.config.ent_coef:
            ent = categorical_entropy(heads[0])
            for h in heads[1:]:
                ent = ad.add(ent, categorical_entropy(h))
            loss = ad.sub(loss, ad.mul(ad.mean(ent), self.config.ent_coef))
        return loss

    def ppo_update(self, batch: RolloutBatch) -> tuple[float, float]:
        cfg = self.config
        if batch.advantages is None:
            raise ValueError("compute advantages before the update")
        adv = normalize(batch.advantages) if cfg.normalize_advantages else batch.advantages
        n = len(batch)
        pis, vs = [], []
        for _ in range(cfg.epochs):
            order = self.minibatch_rng.gen.permutation(n)
            for start in range(0, n, cfg.minibatch):
                mb = order[start : start + cfg.minibatch]
                loss_pi = self.policy_loss(batch.obs[mb], batch.indices[mb], batch.log_prob_old[mb], adv[mb])
                loss_pi.backward()
                self.actor_opt.step()
                v = self.value(batch.obs[mb])
                loss_v = ad.mean(ad.square(ad.sub(v, batch.returns[mb].reshape(-1, 1))))
                loss_v.backward()
                self.value_opt.step()
                pis.append(loss_pi.item())
                vs.append(loss_v.item())
        self.steps += 1
        return float(np.mean(pis)), float(np.mean(vs))

    def entropy(self, obs) -> float:
        with ad.no_grad():
            return float(np.sum([categorical_entropy(h).data.mean() for h in self.actor(np.atleast_2d(obs))]))

    def named_parameters(self) -> dict[str, Tensor]:
        return {**self.actor.named_parameters(), **self.value.named_parameters()}

    def save(self, path, extra: dict | None = None):
        meta = {
            "agent": "ppo_integer",
            "steps": self.steps,
            "config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.config).items()},
            "obs_dim": self.obs_dim,
            "spec": {"bins": list(self.spec.bins), "embed": list(self.spec.embed)},
        }
        save_params(path, self.named_parameters(), {**meta, **(extra or {})})

    def load(self, path) -> dict:
        arrays, meta = read_checkpoint(path)
        load_params(self.named_parameters(), arrays)
        self.steps = int(meta.get("steps", 0))
        return meta
