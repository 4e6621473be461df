"""Actor and critic networks plus the JSON checkpoint format.

Checkpoint layout::

    {
      "format": "intsac-checkpoint/1",
      "params": {"<name>": {"shape": [r, c], "data": [...row-major floats...]}},
      "meta": {...}
    }

Floats are written with Python's shortest round-trip repr, so loading gives
back bit-identical float64 arrays.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Mlp, Tensor
from .distributions import RngStream
from .integer_reparam import IntegerActionSpec, split_heads

CHECKPOINT_FORMAT = "intsac-checkpoint/1"


def _as_batch(state) -> Tensor:
    s = state if isinstance(state, Tensor) else Tensor(state)
    if s.data.ndim == 1:
        s = Tensor(s.data[None, :]) if not s.requires_grad else ad.reshape(s, (1, -1))
    return s


class IntegerActor:
    """Shared trunk with one linear logit head per integer variable.

    The heads are stored as a single ``hidden -> sum(bins)`` layer and cut
    apart on the way out.
    """

    def __init__(self, state_dim: int, spec: IntegerActionSpec, hidden: Sequence[int], rng: RngStream, name="actor"):
        self.state_dim = state_dim
        self.spec = spec
        g = rng.gen
        self.trunk = Mlp([state_dim, *hidden], g, activation="relu", output_activation="relu", name=f"{name}.trunk")
        self.head = Mlp([hidden[-1], spec.logit_width], g, name=f"{name}.head")

    def parameters(self) -> list[Tensor]:
        return self.trunk.parameters() + self.head.parameters()

    def named_parameters(self) -> dict[str, Tensor]:
        return {**self.trunk.named_parameters(), **self.head.named_parameters()}

    def logits(self, state) -> Tensor:
        s = _as_batch(state)
        if s.shape[-1] != self.state_dim:
            raise ad.ShapeError("IntegerActor", s.shape, (None, self.state_dim))
        return self.head(self.trunk(s))

    def __call__(self, state) -> list[Tensor]:
        """K logit heads, each ``[batch, bins[k]]``."""
        return split_heads(self.logits(state), self.spec)


class GaussianActor:
    """State -> (mean, log_std) for a tanh-squashed Gaussian policy."""

    def __init__(self, state_dim: int, action_dim: int, hidden: Sequence[int], rng: RngStream, name="actor"):
        self.state_dim = state_dim
        self.action_dim = action_dim
        g = rng.gen
        self.trunk = Mlp([state_dim, *hidden], g, activation="relu", output_activation="relu", name=f"{name}.trunk")
        self.head = Mlp([hidden[-1], 2 * action_dim], g, name=f"{name}.head")

    def parameters(self) -> list[Tensor]:
        return self.trunk.parameters() + self.head.parameters()

    def named_parameters(self) -> dict[str, Tensor]:
        return {**self.trunk.named_parameters(), **self.head.named_parameters()}

    def __call__(self, state) -> tuple[Tensor, Tensor]:
        s = _as_batch(state)
        if s.shape[-1] != self.state_dim:
            raise ad.ShapeError("GaussianActor", s.shape, (None, self.state_dim))
        out = self.head(self.trunk(s))
        k = self.action_dim
        return ad.columns(out, 0, k), ad.columns(out, k, 2 * k)


class QCritic:
    """Q(s, a) over the concatenation of state and K action coordinates."""

    def __init__(self, state_dim: int, action_dim: int, hidden: Sequence[int], rng: RngStream, name="q"):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.net = Mlp([state_dim + action_dim, *hidden, 1], rng.gen, activation="relu", name=name)

    def parameters(self) -> list[Tensor]:
        return self.net.parameters()

    def named_parameters(self) -> dict[str, Tensor]:
        return self.net.named_parameters()

    def __call__(self, state, action, frozen: bool = False) -> Tensor:
        """``[batch, 1]`` Q estimates.  ``frozen`` blocks parameter gradients
        while keeping the gradient with respect to ``action``."""
        s = _as_batch(state)
        a = _as_batch(action)
        if a.shape[-1] != self.action_dim or s.shape[-1] != self.state_dim or s.shape[0] != a.shape[0]:
            raise ad.ShapeError("QCritic", s.shape, a.shape)
        return self.net(ad.concat([s, a], axis=-1), frozen=frozen)


def save_params(path, params: dict[str, Tensor], meta: dict | None = None):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "params": {
            name: {"shape": list(p.data.shape), "data": p.data.reshape(-1).tolist()} for name, p in params.items()
        },
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(doc))


def read_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not an {CHECKPOINT_FORMAT} file")
    arrays = {}
    for name, entry in doc["params"].items():
        shape = tuple(entry["shape"])
        data = np.array(entry["data"], dtype=np.float64)
        if data.size != math.prod(shape):
            raise ValueError(f"{path}: parameter {name} has {data.size} values for shape {shape}")
        arrays[name] = data.reshape(shape)
    return arrays, doc.get("meta", {})


def load_params(params: dict[str, Tensor], arrays: dict[str, np.ndarray]):
    missing = set(params) - set(arrays)
    if missing:
        raise KeyError(f"checkpoint lacks parameters {sorted(missing)}")
    for name, p in params.items():
        if arrays[name].shape != p.data.shape:
            raise ad.ShapeError(f"load {name}", arrays[name].shape, p.data.shape)
        p.data = arrays[name].copy()
