from .config import ConfigError, TrainConfig
from .curves import aggregate_and_plot, compare, final_score, similar
from .train import NumericError, evaluate, make_agent, make_env, run, run_seed

__all__ = [
    "ConfigError",
    "TrainConfig",
    "aggregate_and_plot",
    "compare",
    "final_score",
    "similar",
    "NumericError",
    "evaluate",
    "make_agent",
    "make_env",
    "run",
    "run_seed",
]
