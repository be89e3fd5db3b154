"""Benchmark environments with parameterized action spaces."""

from .base import STEP_PENALTY, WIN_REWARD, Env, EnvContractError, EnvOutcome
from .catching_point import CatchingPoint
from .chase_attack import ChaseAttack
from .football import Football
from .moving import Moving
from .toy import Bandit, ParamBandit, TwoStateChain

ENVS = {
    "catching_point": CatchingPoint,
    "moving": Moving,
    "chase_attack": ChaseAttack,
    "football": Football,
}
TOY_ENVS = {
    "bandit": Bandit,
    "param_bandit": ParamBandit,
    "two_state": TwoStateChain,
}


def make_env(name: str) -> Env:
    registry = {**ENVS, **TOY_ENVS}
    if name not in registry:
        raise KeyError(f"unknown environment {name!r}; valid: {', '.join(sorted(ENVS))}")
    return registry[name]()


__all__ = [
    "ENVS", "TOY_ENVS", "make_env", "Env", "EnvOutcome", "EnvContractError",
    "CatchingPoint", "Moving", "ChaseAttack", "Football",
    "Bandit", "ParamBandit", "TwoStateChain", "STEP_PENALTY", "WIN_REWARD",
]
