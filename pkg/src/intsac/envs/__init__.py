from .base import Env, EnvError, EnvStep, random_policy_return
from .point_reach import DiscretizedWrapper, PointReachEnv
from .toy import IntegerBandit, TwoStateMDP
from .voltvar import Feeder, VoltVarToyEnv, default_feeder_path

__all__ = [
    "Env",
    "EnvError",
    "EnvStep",
    "random_policy_return",
    "DiscretizedWrapper",
    "PointReachEnv",
    "IntegerBandit",
    "TwoStateMDP",
    "Feeder",
    "VoltVarToyEnv",
    "default_feeder_path",
]
