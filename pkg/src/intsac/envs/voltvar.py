"""Volt-Var control on a small radial feeder with a linearized power flow.

Voltage magnitudes follow the linear branch-flow approximation

    v = v0 + R p + X q + D offsets

where ``p``/``q`` are net bus injections (generation minus load), ``R``/``X``
hold the summed line resistance/reactance of the shared path from the
substation to each pair of buses, and ``D`` maps each regulator's voltage
offset to the buses downstream of it.

Feeder file schema (JSON)::

    buses:       [{name, p_load, q_load}]        first entry is the substation
    lines:       [{from, to, r, x}]              must form a tree rooted at bus 0
    capacitors:  [{name, bus, q}]                on/off, injects q when on
    regulators:  [{name, from, to, taps, step}]  offset (tap - taps//2) * step
    batteries:   [{name, bus, p_max, capacity, levels, soc0}]
    load_profile: [multiplier per step]          episode length = its length
    load_noise, source_voltage, voltage_band, step_hours: scalars
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from ..integer_reparam import IntegerActionSpec, critic_input
from .base import Env, EnvStep

SWITCH_WEIGHT = 0.1
LOSS_WEIGHT = 0.01


def default_feeder_path() -> Path:
    return Path(str(resources.files("intsac.envs") / "data" / "feeder13.json"))


class Feeder:
    """Parsed feeder with its sensitivity matrices (substation excluded)."""

    def __init__(self, spec: dict):
        self.spec = spec
        names = [b["name"] for b in spec["buses"]]
        self.names = names
        pos = {n: i for i, n in enumerate(names)}
        n = len(names)
        parent = [-1] * n
        r_line = np.zeros(n)
        x_line = np.zeros(n)
        for line in spec["lines"]:
            i, j = pos[line["from"]], pos[line["to"]]
            if parent[j] != -1:
                raise ValueError(f"bus {line['to']} has two feeding lines")
            parent[j] = i
            r_line[j], x_line[j] = line["r"], line["x"]
        # path[i] = set of buses whose feeding line lies on the path to i
        path = [set() for _ in range(n)]
        for i in range(1, n):
            j, seen = i, 0
            while j != 0:
                if parent[j] == -1 or seen > n:
                    raise ValueError(f"bus {names[i]} is not connected to the substation")
                path[i].add(j)
                j = parent[j]
                seen += 1
        m = n - 1  # non-substation buses, indexed i-1
        self.R = np.zeros((m, m))
        self.X = np.zeros((m, m))
        for a in range(1, n):
            for b in range(1, n):
                common = list(path[a] & path[b])
                self.R[a - 1, b - 1] = r_line[common].sum()
                self.X[a - 1, b - 1] = x_line[common].sum()
        # downstream[j] = buses fed through line j (j included)
        self.down = np.zeros((m, m))  # down[line j-1, bus i-1] = 1 if line j on path to i
        for i in range(1, n):
            for j in path[i]:
                self.down[j - 1, i - 1] = 1.0
        self.r_line = r_line[1:]
        self.x_line = x_line[1:]
        self.p_load = np.array([b["p_load"] for b in spec["buses"]])[1:]
        self.q_load = np.array([b["q_load"] for b in spec["buses"]])[1:]
        self.v0 = float(spec.get("source_voltage", 1.0))
        self.band = float(spec.get("voltage_band", 0.05))

        self.caps = spec.get("capacitors", [])
        self.regs = spec.get("regulators", [])
        self.bats = spec.get("batteries", [])
        self.cap_bus = np.array([pos[c["bus"]] - 1 for c in self.caps], dtype=int)
        self.cap_q = np.array([c["q"] for c in self.caps], dtype=float)
        self.reg_map = np.zeros((m, len(self.regs)))
        for k, reg in enumerate(self.regs):
            j = pos[reg["to"]]
            if parent[j] != pos[reg["from"]]:
                raise ValueError(f"regulator {reg['name']} is not on a feeder line")
            self.reg_map[:, k] = self.down[j - 1]
        self.reg_taps = np.array([r.get("taps", 33) for r in self.regs], dtype=int)
        self.reg_step = np.array([r.get("step", 0.00625) for r in self.regs], dtype=float)
        self.bat_bus = np.array([pos[b["bus"]] - 1 for b in self.bats], dtype=int)
        self.bat_pmax = np.array([b["p_max"] for b in self.bats], dtype=float)
        self.bat_cap = np.array([b["capacity"] for b in self.bats], dtype=float)
        self.bat_levels = np.array([b.get("levels", 33) for b in self.bats], dtype=int)
        self.bat_soc0 = np.array([b.get("soc0", 0.5) for b in self.bats], dtype=float)
        self.profile = np.array(spec["load_profile"], dtype=float)
        self.noise = float(spec.get("load_noise", 0.0))
        self.dt = float(spec.get("step_hours", 1.0))

    @classmethod
    def from_file(cls, path) -> "Feeder":
        return cls(json.loads(Path(path).read_text()))

    @property
    def n_bus(self) -> int:
        return len(self.p_load)

    def voltages(self, p_inj, q_inj, reg_offsets) -> np.ndarray:
        """Linearized voltage magnitudes at every non-substation bus."""
        return self.v0 + self.R @ p_inj + self.X @ q_inj + self.reg_map @ reg_offsets

    def line_flows(self, p_inj, q_inj) -> tuple[np.ndarray, np.ndarray]:
        """Lossless flows into each line's far end (positive = toward load)."""
        return -self.down @ p_inj, -self.down @ q_inj

    def loss(self, p_inj, q_inj) -> float:
        p, q = self.line_flows(p_inj, q_inj)
        return float(np.sum(self.r_line * (p * p + q * q)))

    def violation(self, v) -> float:
        return float(np.sum(np.maximum(0.0, np.abs(v - 1.0) - self.band)))


class VoltVarToyEnv(Env):
    """Capacitors (on/off), regulator taps and battery levels as integer actions.

    Action layout: capacitors, then regulators, then batteries.  Battery
    level ``l`` of ``L`` requests discharge ``(l - L//2)/(L//2) * p_max``;
    negative values charge.  Reward is

        -(voltage violation) - 0.1 * (# devices changed) - 0.01 * (line loss)

    obs = (bus voltages, device settings scaled to [-1, 1], state of charge,
    t / horizon).  The observation carries the time index, so the end of the
    day is a true terminal state.
    """

    def __init__(self, seed=None, feeder: Feeder | str | Path | None = None):
        super().__init__(seed)
        if feeder is None:
            feeder = default_feeder_path()
        if not isinstance(feeder, Feeder):
            feeder = Feeder.from_file(feeder)
        self.feeder = f = feeder
        bins = (2,) * len(f.caps) + tuple(int(t) for t in f.reg_taps) + tuple(int(l) for l in f.bat_levels)
        self.action_spec = IntegerActionSpec(bins, (False,) * len(bins))
        self.n_cap, self.n_reg, self.n_bat = len(f.caps), len(f.regs), len(f.bats)
        self.horizon = len(f.profile)
        self.obs_dim = f.n_bus + len(bins) + self.n_bat + 1
        self.settings = self.default_settings()
        self.soc = f.bat_soc0.copy()
        self.t = 0
        self.load_mult = np.ones(self.horizon)
        self.v = np.full(f.n_bus, f.v0)

    def default_settings(self) -> np.ndarray:
        f = self.feeder
        return np.concatenate([np.zeros(self.n_cap, int), f.reg_taps // 2, f.bat_levels // 2]).astype(np.int64)

    def _split(self, a):
        c, r = self.n_cap, self.n_cap + self.n_reg
        return a[:c], a[c:r], a[r:]

    def injections(self, settings, t: int, bat_power=None):
        """Net (p, q) injections for given device settings at step ``t``."""
        f = self.feeder
        caps, _, bats = self._split(np.asarray(settings))
        mult = self.load_mult[t]
        p = -f.p_load * mult
        q = -f.q_load * mult
        np.add.at(q, f.cap_bus, f.cap_q * caps)
        if bat_power is None:
            half = f.bat_levels // 2
            bat_power = (bats - half) / half * f.bat_pmax
        np.add.at(p, f.bat_bus, bat_power)
        return p, q

    def reg_offsets(self, settings) -> np.ndarray:
        f = self.feeder
        _, regs, _ = self._split(np.asarray(settings))
        return (regs - f.reg_taps // 2) * f.reg_step

    def evaluate(self, settings, t: int, bat_power=None) -> dict:
        """Voltages, violation and loss for a device setting at step ``t``."""
        p, q = self.injections(settings, t, bat_power)
        v = self.feeder.voltages(p, q, self.reg_offsets(settings))
        return {"voltages": v, "violation": self.feeder.violation(v), "loss": self.feeder.loss(p, q)}

    def _obs(self):
        scaled = critic_input(self.settings, self.action_spec)
        return np.concatenate([self.v, scaled, self.soc, [self.t / self.horizon]])

    def reset(self, seed=None):
        self._reseed(seed)
        f = self.feeder
        self.load_mult = f.profile * (1.0 + f.noise * self._rng.standard_normal(self.horizon))
        self.settings = self.default_settings()
        self.soc = f.bat_soc0.copy()
        self.t = 0
        self.v = self.evaluate(self.settings, 0, np.zeros(self.n_bat))["voltages"]
        self._done = False
        return self._obs()

    def step(self, action) -> EnvStep:
        self._check_step()
        a = self._check_indices(action)
        f = self.feeder
        _, _, bats = self._split(a)
        half = f.bat_levels // 2
        request = (bats - half) / half * f.bat_pmax
        soc = np.clip(self.soc - request * f.dt / f.bat_cap, 0.0, 1.0)
        power = (self.soc - soc) * f.bat_cap / f.dt
        out = self.evaluate(a, self.t, power)
        switched = int(np.sum(a != self.settings))
        reward = -out["violation"] - SWITCH_WEIGHT * switched - LOSS_WEIGHT * out["loss"]
        self.settings = a
        self.soc = soc
        self.v = out["voltages"]
        self.t += 1
        self._done = self.t >= self.horizon
        info = {
            "violation": out["violation"],
            "switched": switched,
            "loss": out["loss"],
            "battery_power": power,
        }
        return EnvStep(self._obs(), float(reward), self._done, info)
