"""Seeded sampling plus the Gumbel reparameterization chain.

Gumbel noise -> Gumbel-Max sample -> Gumbel-Softmax relaxation -> straight-
through one-hot.  All samplers work row-wise on ``[batch, n]`` logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

UNIFORM_EPS = 1e-12
LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
# tanh saturates to +-1.0 in float64 past |x| ~ 19
ACTION_BOUND = 1.0 - 1e-9


class RngStream:
    """Deterministic, splittable random stream.

    Children are keyed by integers (e.g. module id, step, dimension) and are
    derived from the parent seed only, so they do not depend on how much the
    parent has already been consumed.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self._seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(key))

    def uniform(self, size=None, low=0.0, high=1.0):
        return self.gen.uniform(low, high, size)

    def normal(self, size=None):
        return self.gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def choice(self, n: int, size: int, replace: bool = False):
        return self.gen.choice(n, size=size, replace=replace)

    def get_state(self) -> dict:
        return self.gen.bit_generator.state

    def set_state(self, state: dict):
        self.gen.bit_generator.state = state


def sample_gumbel(shape, rng: RngStream) -> np.ndarray:
    """Standard Gumbel(0, 1) draws, G = -log(-log U)."""
    u = np.clip(rng.uniform(size=shape), UNIFORM_EPS, 1.0 - UNIFORM_EPS)
    return -np.log(-np.log(u))


def _logits_array(logits) -> np.ndarray:
    x = logits.data if isinstance(logits, Tensor) else np.asarray(logits, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ValueError(f"need at least 2 categories, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise ad.DomainError("non-finite logits")
    return x


def gumbel_max(logits, rng: RngStream, gumbels: np.ndarray | None = None) -> np.ndarray:
    """argmax(logits + G) along the last axis; ties go to the lowest index."""
    x = _logits_array(logits)
    if gumbels is None:
        gumbels = sample_gumbel(x.shape, rng)
    return np.argmax(x + gumbels, axis=-1)


def gumbel_softmax(logits, gumbels: np.ndarray, tau: float = 1.0) -> Tensor:
    """softmax((logits + G) / tau); differentiable in ``logits``."""
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    z = ad.add(logits, gumbels)
    if tau != 1.0:
        z = ad.mul(z, 1.0 / tau)
    return ad.softmax(z, axis=-1)


@dataclass
class StgsSample:
    forward: Tensor  # one-hot payload, relaxed gradient
    index: np.ndarray
    relaxed: Tensor
    gumbels: np.ndarray


def one_hot(index: np.ndarray, n: int) -> np.ndarray:
    index = np.asarray(index)
    out = np.zeros(index.shape + (n,))
    np.put_along_axis(out, index[..., None], 1.0, axis=-1)
    return out


def stgs(logits, tau: float, rng: RngStream | None = None, gumbels: np.ndarray | None = None) -> StgsSample:
    """Straight-through Gumbel-Softmax.

    The same Gumbel draw feeds the hard argmax and the relaxation.  The
    forward tensor is ``hard + (relaxed - detach(relaxed))``: the bracket is
    exactly zero in value, so the payload is an exact one-hot, while the
    gradient is that of ``relaxed``.
    """
    x = _logits_array(logits)
    if gumbels is None:
        gumbels = sample_gumbel(x.shape, rng)
    index = np.argmax(x + gumbels, axis=-1)
    relaxed = gumbel_softmax(logits, gumbels, tau)
    hard = one_hot(index, x.shape[-1])
    forward = ad.add(hard, ad.sub(relaxed, ad.detach(relaxed)))
    return StgsSample(forward=forward, index=index, relaxed=relaxed, gumbels=gumbels)


def categorical_log_prob(logits, index) -> Tensor:
    """log softmax(logits)[index] per row, shape ``[batch, 1]``."""
    logits = ad.tensor(logits)
    n = logits.shape[-1]
    index = np.asarray(index)
    if np.any(index < 0) or np.any(index >= n):
        raise IndexError(f"category index out of range [0, {n})")
    return ad.inner(ad.log_softmax(logits, axis=-1), one_hot(index, n))


def categorical_entropy(logits) -> Tensor:
    """Exact entropy per row, shape ``[batch, 1]``."""
    logp = ad.log_softmax(logits, axis=-1)
    return ad.neg(ad.inner(ad.exp(logp), logp))


def squashed_gaussian(mean, log_std, rng: RngStream | None = None, noise: np.ndarray | None = None):
    """tanh-Gaussian sample with its log-density.

    Returns ``(action, log_prob)``; ``action`` has the shape of ``mean``,
    ``log_prob`` is ``[batch, 1]`` and includes the tanh Jacobian.
    """
    mean = ad.tensor(mean)
    log_std = ad.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    if noise is None:
        noise = rng.normal(mean.shape)
    std = ad.exp(log_std)
    pre = ad.add(mean, ad.mul(std, noise))
    action = ad.clip(ad.tanh(pre), -ACTION_BOUND, ACTION_BOUND)
    # log N(pre; mean, std) with (pre - mean)/std == noise exactly
    gauss = ad.sub(-0.5 * noise**2 - 0.5 * np.log(2 * np.pi), log_std)
    # log(1 - tanh(x)^2) = 2 (log 2 - x - softplus(-2x)), stable for large |x|
    jac = _log_one_minus_tanh_sq(pre)
    log_prob = ad.sum(ad.sub(gauss, jac), axis=-1, keepdims=True)
    return action, log_prob


def _log_one_minus_tanh_sq(pre: Tensor) -> Tensor:
    x = pre.data
    out = 2.0 * (np.log(2.0) - x - np.logaddexp(0.0, -2.0 * x))
    # d/dx = -2 tanh(x)
    t = np.tanh(x)
    return ad._make(out, (pre,), lambda g: (-2.0 * g * t,))
