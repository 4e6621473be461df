"""Soft Actor-Critic for integer (straight-through) and continuous actions.

Both modes share the replay buffer, the twin critics, the TD target and the
update code; they differ only in how the actor turns a state into a
differentiable action in [-1, 1]^K and its log-probability.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor
from .distributions import RngStream, categorical_entropy, squashed_gaussian
from .integer_reparam import (
    IntegerActionSpec,
    assemble_action,
    critic_action,
    critic_input,
    greedy_indices,
)
from .networks import GaussianActor, IntegerActor, QCritic, load_params, read_checkpoint, save_params

INTEGER = "integer"
CONTINUOUS = "continuous"


@dataclass
class SacConfig:
    alpha: float = 0.05
    gamma: float = 0.99
    polyak: float = 0.005
    tau: float = 1.0  # Gumbel-Softmax temperature
    hidden: tuple[int, ...] = (256, 256)
    lr: float = 3e-4
    batch_size: int = 256
    exact_entropy: bool = False


class Batch(NamedTuple):
    obs: np.ndarray
    indices: np.ndarray
    action: np.ndarray  # critic-space action in [-1, 1]^K
    reward: np.ndarray  # [B, 1]
    next_obs: np.ndarray
    done: np.ndarray  # [B, 1]; 1 only for true terminals


class ReplayBuffer:
    """Fixed-capacity ring of transitions with FIFO eviction."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int, rng: RngStream):
        self.capacity = int(capacity)
        self.rng = rng
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.indices = np.zeros((capacity, action_dim), dtype=np.int64)
        self.action = np.zeros((capacity, action_dim))
        self.reward = np.zeros((capacity, 1))
        self.done = np.zeros((capacity, 1))
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, obs, indices, action, reward, next_obs, done):
        i = self.cursor
        self.obs[i] = obs
        self.indices[i] = indices
        self.action[i] = action
        self.reward[i, 0] = reward
        self.next_obs[i] = next_obs
        self.done[i, 0] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int) -> Batch:
        """Uniform sample, without replacement inside one batch."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        n = min(batch_size, self.size)
        idx = self.rng.choice(self.size, n, replace=False)
        return Batch(
            self.obs[idx], self.indices[idx], self.action[idx], self.reward[idx], self.next_obs[idx], self.done[idx]
        )


@dataclass
class UpdateInfo:
    loss_q1: float
    loss_q2: float
    loss_pi: float
    entropy: float = field(default=float("nan"))


class SacAgent:
    """Twin-critic SAC with fixed entropy temperature."""

    def __init__(
        self,
        obs_dim: int,
        mode: str,
        config: SacConfig,
        rng: RngStream,
        spec: IntegerActionSpec | None = None,
        action_dim: int | None = None,
    ):
        if mode not in (INTEGER, CONTINUOUS):
            raise ValueError(f"unknown SAC mode {mode!r}")
        if not config.alpha >= 0:
            raise ValueError("alpha must be non-negative")
        if not 0 <= config.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 < config.polyak <= 1:
            raise ValueError("polyak coefficient must lie in (0, 1]")
        self.mode = mode
        self.config = config
        self.obs_dim = obs_dim
        self.spec = spec
        if mode == INTEGER:
            if spec is None:
                raise ValueError("integer mode needs an IntegerActionSpec")
            self.action_dim = spec.dims
            self.actor = IntegerActor(obs_dim, spec, config.hidden, rng.child(0))
        else:
            if action_dim is None:
                raise ValueError("continuous mode needs action_dim")
            self.action_dim = action_dim
            self.actor = GaussianActor(obs_dim, action_dim, config.hidden, rng.child(0))
        self.q1 = QCritic(obs_dim, self.action_dim, config.hidden, rng.child(1), name="q1")
        self.q2 = QCritic(obs_dim, self.action_dim, config.hidden, rng.child(2), name="q2")
        self.q1_target = QCritic(obs_dim, self.action_dim, config.hidden, rng.child(1), name="q1_target")
        self.q2_target = QCritic(obs_dim, self.action_dim, config.hidden, rng.child(2), name="q2_target")
        self.q1_target.net.copy_from(self.q1.net)
        self.q2_target.net.copy_from(self.q2.net)
        self.actor_opt = Adam(self.actor.parameters(), lr=config.lr)
        self.q1_opt = Adam(self.q1.parameters(), lr=config.lr)
        self.q2_opt = Adam(self.q2.parameters(), lr=config.lr)
        self.sample_rng = rng.child(3)
        self.steps = 0

    @property
    def alpha(self) -> float:
        return self.config.alpha

    # -- policy ---------------------------------------------------------------

    def policy_sample(self, obs, rng: RngStream | None = None):
        """Reparameterized action for the critic plus its log-prob term.

        Returns ``(action [B, K], log_prob [B, 1], indices or None)``.  With
        ``exact_entropy`` the log-prob term is ``-sum_k H(head_k)``.
        """
        rng = rng or self.sample_rng
        if self.mode == INTEGER:
            heads = self.actor(obs)
            sample = assemble_action(heads, self.spec, self.config.tau, rng)
            logp = sample.log_prob
            if self.config.exact_entropy:
                ent = categorical_entropy(heads[0])
                for h in heads[1:]:
                    ent = ad.add(ent, categorical_entropy(h))
                logp = ad.neg(ent)
            return critic_action(sample, self.spec), logp, sample.indices
        mean, log_std = self.actor(obs)
        action, logp = squashed_gaussian(mean, log_std, rng)
        return action, logp, None

    def act(self, obs, deterministic: bool = False, rng: RngStream | None = None):
        """Action for one observation.

        Returns ``(env_action, critic_action)``: integer mode gives the index
        vector for the env; continuous mode gives the vector in [-1, 1]^K.
        """
        rng = rng or self.sample_rng
        obs = np.asarray(obs, dtype=np.float64)[None, :]
        with ad.no_grad():
            if self.mode == INTEGER:
                if deterministic:
                    idx = greedy_indices(self.actor(obs))[0]
                else:
                    idx = self.policy_sample(obs, rng)[2][0]
                return idx, critic_input(idx, self.spec)
            if deterministic:
                mean, _ = self.actor(obs)
                a = np.tanh(mean.data[0])
            else:
                a = self.policy_sample(obs, rng)[0].data[0]
            return a, a

    def entropy(self, obs) -> float:
        """Mean exact policy entropy (integer) or -log-prob estimate (continuous)."""
        with ad.no_grad():
            if self.mode == INTEGER:
                return float(np.sum([categorical_entropy(h).data.mean() for h in self.actor(obs)]))
            _, logp, _ = self.policy_sample(obs)
            return float(-logp.data.mean())

    # -- updates --------------------------------------------------------------

    def td_target(self, batch: Batch) -> np.ndarray:
        cfg = self.config
        with ad.no_grad():
            a2, logp2, _ = self.policy_sample(batch.next_obs)
            q_next = np.minimum(
                self.q1_target(batch.next_obs, a2).data, self.q2_target(batch.next_obs, a2).data
            )
            soft = q_next - cfg.alpha * logp2.data
        return batch.reward + cfg.gamma * (1.0 - batch.done) * soft

    def critic_update(self, batch: Batch) -> tuple[float, float]:
        if len(batch.obs) == 0:
            raise ValueError("critic update needs a non-empty batch")
        y = self.td_target(batch)
        losses = []
        for q, opt in ((self.q1, self.q1_opt), (self.q2, self.q2_opt)):
            loss = ad.mean(ad.square(ad.sub(q(batch.obs, batch.action), y)))
            loss.backward()
            opt.step()
            losses.append(loss.item())
        return losses[0], losses[1]

    def actor_loss(self, batch: Batch) -> Tensor:
        """mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a)); critics act as constants."""
        a, logp, _ = self.policy_sample(batch.obs)
        q = ad.minimum(self.q1(batch.obs, a, frozen=True), self.q2(batch.obs, a, frozen=True))
        return ad.mean(ad.sub(ad.mul(logp, self.config.alpha), q))

    def actor_update(self, batch: Batch) -> float:
        loss = self.actor_loss(batch)
        loss.backward()
        self.actor_opt.step()
        return loss.item()

    def polyak_update(self):
        rho = self.config.polyak
        for net, target in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            for p, t in zip(net.parameters(), target.parameters()):
                t.data = rho * p.data + (1.0 - rho) * t.data

    def update(self, batch: Batch) -> UpdateInfo:
        l1, l2 = self.critic_update(batch)
        lpi = self.actor_update(batch)
        self.polyak_update()
        self.steps += 1
        return UpdateInfo(l1, l2, lpi)

    # -- persistence ------------------------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        out = {}
        for net in (self.actor, self.q1, self.q2, self.q1_target, self.q2_target):
            out.update(net.named_parameters())
        return out

    def state_dict(self) -> dict:
        meta = {
            "agent": f"sac_{self.mode}",
            "alpha": self.config.alpha,
            "gamma": self.config.gamma,
            "polyak": self.config.polyak,
            "steps": self.steps,
            "config": _jsonable(asdict(self.config)),
            "obs_dim": self.obs_dim,
            "action_dim": self.action_dim,
        }
        if self.spec is not None:
            meta["spec"] = {"bins": list(self.spec.bins), "embed": list(self.spec.embed)}
        return meta

    def save(self, path, extra: dict | None = None):
        save_params(path, self.named_parameters(), {**self.state_dict(), **(extra or {})})

    def load(self, path) -> dict:
        arrays, meta = read_checkpoint(path)
        load_params(self.named_parameters(), arrays)
        self.steps = int(meta.get("steps", 0))
        return meta


def _jsonable(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
