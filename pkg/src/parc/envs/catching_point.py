from __future__ import annotations

import math

import numpy as np

from ..action_space import make_schema
from .base import WIN_REWARD, Env, clip01, scale01

MOVE_DIST = 0.05
TARGET_STEP = 0.02
CATCH_RADIUS = 0.1
FAILED_CATCH = -0.2
MAX_CATCHES = 10
SQRT2 = math.sqrt(2.0)


class CatchingPoint(Env):
    """Catch a random-walking target with at most ten CATCH attempts."""

    name = "catching_point"
    time_limit = 200
    schema = make_schema(("MOVE", [("direction", -math.pi, math.pi)]), ("CATCH", []))
    obs_dim = 8

    def _reset(self):
        u = self.rng.uniform(4)
        self.agent = [float(u[0]), float(u[1])]
        self.target = [float(u[2]), float(u[3])]
        self.catches_left = MAX_CATCHES

    def _dist(self) -> float:
        return math.hypot(self.target[0] - self.agent[0], self.target[1] - self.agent[1])

    def _step(self, a, x):
        if a == 1:
            self.catches_left -= 1
            if self._dist() <= CATCH_RADIUS:
                return WIN_REWARD, True, True
            self._move_target()
            return FAILED_CATCH, self.catches_left == 0, False
        before = self._dist()
        d = float(x[0])
        self.agent[0] = clip01(self.agent[0] + MOVE_DIST * math.cos(d))
        self.agent[1] = clip01(self.agent[1] + MOVE_DIST * math.sin(d))
        self._move_target()
        return before - self._dist(), False, False

    def _move_target(self):
        th = 2.0 * math.pi * self.rng.uniform()
        self.target[0] = clip01(self.target[0] + TARGET_STEP * math.cos(th))
        self.target[1] = clip01(self.target[1] + TARGET_STEP * math.sin(th))

    def observe(self):
        dx = self.target[0] - self.agent[0]
        dy = self.target[1] - self.agent[1]
        return np.array([
            scale01(self.agent[0]), scale01(self.agent[1]),
            scale01(self.target[0]), scale01(self.target[1]),
            dx, dy,
            scale01(self._dist() / SQRT2),
            scale01(self.catches_left / MAX_CATCHES),
        ])

    def state_dict(self):
        return {"t": self.t, "agent": list(self.agent), "target": list(self.target),
                "catches_left": self.catches_left}

    def scripted_action(self):
        if self._dist() <= CATCH_RADIUS:
            return 1, np.zeros(0)
        d = math.atan2(self.target[1] - self.agent[1], self.target[0] - self.agent[0])
        return 0, np.array([d])
