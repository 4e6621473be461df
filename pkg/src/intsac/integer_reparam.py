"""Differentiable random integers.

An integer variable with N values is drawn as a straight-through one-hot and
collapsed to a single number by the inner product with ``[0, 1, ..., N-1]``.
The number keeps the straight-through gradient, so each integer action costs
one coordinate downstream no matter how many values it can take.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .distributions import RngStream, one_hot, stgs


@dataclass(frozen=True)
class IntegerActionSpec:
    """K integer action variables; variable k takes values ``0..bins[k]-1``.

    ``embed[k]`` says whether the agent-side action is mapped into [-1, 1]
    (discretized continuous control) or kept as the raw integer.
    """

    bins: tuple[int, ...]
    embed: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(int(n) for n in self.bins))
        object.__setattr__(self, "embed", tuple(bool(e) for e in self.embed))
        if not self.bins:
            raise ValueError("an integer action spec needs at least one dimension")
        if len(self.embed) != len(self.bins):
            raise ValueError("bins and embed flags differ in length")
        if min(self.bins) < 2:
            raise ValueError(f"every dimension needs at least 2 values, got {self.bins}")

    @classmethod
    def uniform(cls, dims: int, bins: int, embed: bool = True) -> "IntegerActionSpec":
        return cls((bins,) * dims, (embed,) * dims)

    @property
    def dims(self) -> int:
        return len(self.bins)

    @property
    def logit_width(self) -> int:
        return int(np.sum(self.bins))

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(o) for o in np.concatenate([[0], np.cumsum(self.bins)]))

    def contains(self, indices) -> bool:
        idx = np.asarray(indices)
        return idx.shape[-1] == self.dims and bool(np.all((idx >= 0) & (idx < np.array(self.bins))))


def index_value(onehot, n: int) -> Tensor:
    """<[0, 1, ..., n-1], onehot> per row, shape ``[batch, 1]``."""
    return ad.inner(onehot, np.arange(n, dtype=np.float64))


def integer_sample(logits, tau: float, rng: RngStream | None = None, gumbels=None):
    """Draw a differentiable integer per row.

    Returns ``(value, index)`` where ``value`` is a ``[batch, 1]`` tensor whose
    payload equals ``index`` exactly.
    """
    sample = stgs(logits, tau, rng, gumbels)
    n = sample.forward.shape[-1]
    return index_value(sample.forward, n), sample.index


def embed(value, n: int):
    """Affine map of ``0..n-1`` onto [-1, 1]; works on tensors and arrays."""
    if n < 2:
        raise ValueError(f"embedding needs n >= 2, got {n}")
    # (2 a) / (n - 1) is exact at both endpoints
    if isinstance(value, Tensor):
        return ad.sub(ad.div(ad.mul(value, 2.0), float(n - 1)), 1.0)
    return np.asarray(value, dtype=np.float64) * 2.0 / (n - 1) - 1.0


def unembed(x, n: int) -> np.ndarray:
    """Nearest integer index for a point of [-1, 1]."""
    idx = np.rint((np.asarray(x, dtype=np.float64) + 1.0) * (n - 1) / 2.0)
    return np.clip(idx, 0, n - 1).astype(np.int64)


def split_heads(logits: Tensor, spec: IntegerActionSpec) -> list[Tensor]:
    """Cut a ``[batch, sum(bins)]`` logit block into K per-variable heads."""
    if logits.shape[-1] != spec.logit_width:
        raise ad.ShapeError("split_heads", logits.shape, (None, spec.logit_width))
    off = spec.offsets
    return [ad.columns(logits, off[k], off[k + 1]) for k in range(spec.dims)]


@dataclass
class IntegerAction:
    action: Tensor  # [batch, K]; embedded or raw per spec.embed
    indices: np.ndarray  # [batch, K] int
    log_prob: Tensor  # [batch, 1]
    onehots: list[Tensor]


def assemble_action(
    heads: Sequence[Tensor],
    spec: IntegerActionSpec,
    tau: float,
    rng: RngStream | None = None,
    gumbels: Sequence[np.ndarray] | None = None,
) -> IntegerAction:
    """Sample all K integer variables independently and stack them.

    The joint log-probability is the sum of per-variable categorical log-probs,
    evaluated as ``<onehot, log_softmax(head)>`` so that, besides its direct
    dependence on the logits, it also carries the straight-through path of
    the sampled one-hot.  Its payload equals ``sum_k log p_k(index_k)``.
    """
    if len(heads) != spec.dims:
        raise ValueError(f"expected {spec.dims} heads, got {len(heads)}")
    cols, idx, logps, onehots = [], [], [], []
    for k, (head, n) in enumerate(zip(heads, spec.bins)):
        if head.shape[-1] != n:
            raise ad.ShapeError("assemble_action", head.shape, (None, n))
        sample = stgs(head, tau, rng, None if gumbels is None else gumbels[k])
        value = index_value(sample.forward, n)
        cols.append(embed(value, n) if spec.embed[k] else value)
        idx.append(sample.index)
        logps.append(ad.inner(sample.forward, ad.log_softmax(head, axis=-1)))
        onehots.append(sample.forward)
    action = cols[0] if len(cols) == 1 else ad.concat(cols, axis=-1)
    log_prob = logps[0]
    for lp in logps[1:]:
        log_prob = ad.add(log_prob, lp)
    return IntegerAction(action, np.stack(idx, axis=-1), log_prob, onehots)


def joint_log_prob(heads: Sequence[Tensor], indices: np.ndarray) -> Tensor:
    """Sum of per-variable categorical log-probs of fixed indices (no sample path)."""
    indices = np.asarray(indices)
    total = None
    for k, head in enumerate(heads):
        n = head.shape[-1]
        lp = ad.inner(ad.log_softmax(head, axis=-1), one_hot(indices[..., k], n))
        total = lp if total is None else ad.add(total, lp)
    return total


def greedy_indices(heads: Sequence) -> np.ndarray:
    """Per-variable argmax; the deterministic evaluation action."""
    return np.stack([np.argmax(h.data if isinstance(h, Tensor) else h, axis=-1) for h in heads], axis=-1)


def critic_input(indices: np.ndarray, spec: IntegerActionSpec) -> np.ndarray:
    """Indices mapped to [-1, 1] per variable; what the critic sees."""
    indices = np.asarray(indices, dtype=np.float64)
    return indices * 2.0 / (np.array(spec.bins) - 1) - 1.0


def critic_action(sample: IntegerAction, spec: IntegerActionSpec) -> Tensor:
    """Differentiable [-1, 1] version of a sampled action for the critic."""
    if all(spec.embed):
        return sample.action
    cols = []
    for k, n in enumerate(spec.bins):
        col = ad.columns(sample.action, k, k + 1)
        cols.append(col if spec.embed[k] else embed(col, n))
    return cols[0] if len(cols) == 1 else ad.concat(cols, axis=-1)
