"""Reinforcement learning in parameterized (discrete + continuous) action spaces."""

from .action_space import ActionSchema, HybridAction, make_schema
from .envs import ENVS, make_env
from .hppo import TrainConfig, train
from .dqn import DqnConfig, train_dqn

__all__ = ["ActionSchema", "HybridAction", "make_schema", "ENVS", "make_env",
           "TrainConfig", "train", "DqnConfig", "train_dqn"]
__version__ = "0.1.0"
