from __future__ import annotations

import math

import numpy as np

from ..action_space import make_schema
from .base import WIN_REWARD, Env, scale01, wrap_angle

ACCEL_GAIN = 0.02
MAX_SPEED = 0.1
TURN_MAX = math.pi / 6.0
TARGET_RADIUS = 0.1
EXIT_PENALTY = -1.0
SQRT2 = math.sqrt(2.0)


class Moving(Env):
    """Steer a vehicle into a target disc and brake inside it.

    The agent always translates along its heading at its current speed;
    TURN is relative to the current heading.
    """

    name = "moving"
    time_limit = 200
    schema = make_schema(
        ("ACCEL", [("power", 0.0, 1.0)]),
        ("TURN", [("turn", -1.0, 1.0)]),
        ("BRAKE", []),
    )
    obs_dim = 11

    def _reset(self):
        u = self.rng.uniform(5)
        self.agent = [0.1 + 0.3 * float(u[0]), 0.1 + 0.3 * float(u[1])]
        self.heading = wrap_angle(2.0 * math.pi * float(u[2]))
        self.speed = 0.0
        self.target = [0.6 + 0.3 * float(u[3]), 0.6 + 0.3 * float(u[4])]

    def _dist(self) -> float:
        return math.hypot(self.target[0] - self.agent[0], self.target[1] - self.agent[1])

    def _step(self, a, x):
        before = self._dist()
        if a == 0:
            self.speed = min(self.speed + ACCEL_GAIN * float(x[0]), MAX_SPEED)
        elif a == 1:
            self.heading = wrap_angle(self.heading + float(x[0]) * TURN_MAX)
        else:
            self.speed = 0.0
        self.agent[0] += self.speed * math.cos(self.heading)
        self.agent[1] += self.speed * math.sin(self.heading)
        if not (0.0 <= self.agent[0] <= 1.0 and 0.0 <= self.agent[1] <= 1.0):
            return EXIT_PENALTY, True, False
        after = self._dist()
        if a == 2 and after <= TARGET_RADIUS:
            return WIN_REWARD + before - after, True, True
        return before - after, False, False

    def observe(self):
        dx = self.target[0] - self.agent[0]
        dy = self.target[1] - self.agent[1]
        c, s = math.cos(self.heading), math.sin(self.heading)
        return np.array([
            scale01(min(max(self.agent[0], 0.0), 1.0)), scale01(min(max(self.agent[1], 0.0), 1.0)),
            c, s,
            scale01(self.speed / MAX_SPEED),
            scale01(self.target[0]), scale01(self.target[1]),
            dx, dy,
            (dx * c + dy * s) / SQRT2, (-dx * s + dy * c) / SQRT2,
        ])

    def state_dict(self):
        return {"t": self.t, "agent": list(self.agent), "heading": self.heading,
                "speed": self.speed, "target": list(self.target)}

    def scripted_action(self):
        dist = self._dist()
        if dist <= 0.8 * TARGET_RADIUS:
            return 2, np.zeros(0)
        want = math.atan2(self.target[1] - self.agent[1], self.target[0] - self.agent[0])
        err = wrap_angle(want - self.heading)
        if abs(err) > 1e-9 and self.speed == 0.0:
            return 1, np.array([max(-1.0, min(1.0, err / TURN_MAX))])
        cruise = 0.04
        return 0, np.array([max(0.0, min(1.0, (cruise - self.speed) / ACCEL_GAIN))])
