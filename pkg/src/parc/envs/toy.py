"""Tiny environments with known optima, used as learning oracles."""

from __future__ import annotations

import numpy as np

from ..action_space import make_schema
from .base import Env


class Bandit(Env):
    """One-step, two-armed bandit: arm 0 pays +1, arm 1 pays -1."""

    name = "bandit"
    time_limit = 1
    step_penalty = 0.0
    schema = make_schema(("GOOD", []), ("BAD", []))
    obs_dim = 1

    def __init__(self, payoffs=(1.0, -1.0)):
        super().__init__()
        self.payoffs = tuple(payoffs)

    def _reset(self):
        pass

    def _step(self, a, x):
        best = int(np.argmax(self.payoffs))
        return self.payoffs[a], True, a == best

    def observe(self):
        return np.ones(1)

    def state_dict(self):
        return {"t": self.t}

    def scripted_action(self):
        return int(np.argmax(self.payoffs)), np.zeros(0)


class ParamBandit(Env):
    """One-step bandit with a parameterized arm: HIT(x) pays 1 - (x - 0.5)^2 * 4, SKIP pays 0."""

    name = "param_bandit"
    time_limit = 1
    step_penalty = 0.0
    schema = make_schema(("HIT", [("x", -1.0, 1.0)]), ("SKIP", []))
    obs_dim = 1

    def _reset(self):
        pass

    def _step(self, a, x):
        if a == 1:
            return 0.0, True, False
        r = 1.0 - 4.0 * (float(x[0]) - 0.5) ** 2
        return r, True, r > 0.9

    def observe(self):
        return np.ones(1)

    def state_dict(self):
        return {"t": self.t}

    def scripted_action(self):
        return 0, np.array([0.5])


class TwoStateChain(Env):
    """Deterministic two-state MDP for checking Q-learning fixed points.

    State 0: action 0 -> state 1 (r=0); action 1 -> terminal (r=1).
    State 1: action 0 -> terminal (r=2); action 1 -> state 0 (r=0).
    """

    name = "two_state"
    time_limit = 50
    step_penalty = 0.0
    schema = make_schema(("A0", []), ("A1", []))
    obs_dim = 2

    def _reset(self):
        self.s = 0

    def _step(self, a, x):
        if self.s == 0:
            if a == 0:
                self.s = 1
                return 0.0, False, False
            return 1.0, True, False
        if a == 0:
            return 2.0, True, True
        self.s = 0
        return 0.0, False, False

    def observe(self):
        return np.eye(2)[self.s]

    def state_dict(self):
        return {"t": self.t, "s": self.s}

    def scripted_action(self):
        return 0, np.zeros(0)
