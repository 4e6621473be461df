"""Named experiment groups shared by ``scripts/`` and the acceptance suite.

Every group uses the desk-scale network (two hidden layers of 64) and batch
size 64 so a 100k-step run fits in a few minutes on one CPU core; all other
settings are the TrainConfig defaults unless listed.
"""

from __future__ import annotations

from pathlib import Path

from .config import TrainConfig
from .curves import aggregate_and_plot, compare
from .train import run

DESK = {"hidden": [64, 64], "batch_size": 64, "seeds": [0, 1, 2]}

GROUPS: dict[str, dict[str, dict]] = {
    # continuous vs discretized control on the point-reaching task
    "point_reach": {
        "sac_continuous": {"env": "point_reach", "agent": "sac_continuous", "total_steps": 100_000},
        "sac_integer_d9": {"env": "point_reach", "agent": "sac_integer", "bins": 9, "total_steps": 100_000},
        "sac_integer_d17": {"env": "point_reach", "agent": "sac_integer", "bins": 17, "total_steps": 100_000},
    },
    # integer SAC vs PPO on Volt-Var control, equal step budgets.  At the env
    # default alpha=0.05 and tau=1 the 33-level heads stay near uniform, so the
    # critic never sees a device held in place and cannot learn the switching cost.
    "voltvar": {
        "sac_integer": {"env": "voltvar13", "agent": "sac_integer", "alpha": 0.002, "tau": 0.25,
                        "total_steps": 50_000, "eval_interval": 2500},
        "ppo_integer": {"env": "voltvar13", "agent": "ppo_integer", "total_steps": 50_000, "eval_interval": 2500},
        "random": {"env": "voltvar13", "agent": "random", "total_steps": 50_000, "eval_interval": 2500},
    },
}


def group_config(group: str, name: str, root, **overrides) -> TrainConfig:
    d = {**DESK, **GROUPS[group][name], "out_dir": str(Path(root) / group / name), **overrides}
    return TrainConfig.from_dict(d)


def run_group(group: str, root, names=None, **overrides) -> dict:
    """Train every member of ``group`` under ``root``, then plot and compare."""
    names = list(names or GROUPS[group])
    dirs = []
    for name in names:
        cfg = group_config(group, name, root, **overrides)
        run(cfg)
        dirs.append(Path(cfg.out_dir))
    plot = aggregate_and_plot(dirs, Path(root) / group / "curves")
    scores, verdicts = compare(dirs)
    return {"dirs": dirs, "plot": plot, "scores": {s.label: s for s in scores}, "verdicts": verdicts}
