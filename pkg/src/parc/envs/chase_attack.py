from __future__ import annotations

import math

import numpy as np

from ..action_space import make_schema
from .base import Env, clip01, scale01, wrap_angle

RUSH_DIST = 0.05
RUNNER_STEP = 0.03
WALL_MARGIN = 0.05
ATTACK_RANGE = 0.15
ATTACK_HALF_ANGLE = math.radians(30.0)
HIT_REWARD = 1.5
WIN_BONUS = 1.0
RUNNER_LIVES = 3
RESPAWN_MIN_DIST = 0.3
SQRT2 = math.sqrt(2.0)


class ChaseAttack(Env):
    """Chase a fleeing rule-based runner and land three attacks on it.

    Non-hit steps are rewarded with the decrease in agent-runner distance;
    hit steps give the hit reward only, since the runner respawns.
    """

    name = "chase_attack"
    time_limit = 250
    schema = make_schema(
        ("RUSH", [("direction", -math.pi, math.pi)]),
        ("ATTACK", [("direction", -math.pi, math.pi)]),
    )
    obs_dim = 8

    def _reset(self):
        u = self.rng.uniform(2)
        self.agent = [float(u[0]), float(u[1])]
        self.lives = RUNNER_LIVES
        self._spawn_runner()

    def _spawn_runner(self):
        while True:
            u = self.rng.uniform(2)
            if math.hypot(u[0] - self.agent[0], u[1] - self.agent[1]) >= RESPAWN_MIN_DIST:
                self.runner = [float(u[0]), float(u[1])]
                return

    def _dist(self) -> float:
        return math.hypot(self.runner[0] - self.agent[0], self.runner[1] - self.agent[1])

    def _step(self, a, x):
        d = float(x[0])
        before = self._dist()
        if a == 0:
            self.agent[0] = clip01(self.agent[0] + RUSH_DIST * math.cos(d))
            self.agent[1] = clip01(self.agent[1] + RUSH_DIST * math.sin(d))
        else:
            bearing = math.atan2(self.runner[1] - self.agent[1], self.runner[0] - self.agent[0])
            if self._dist() <= ATTACK_RANGE and abs(wrap_angle(bearing - d)) <= ATTACK_HALF_ANGLE:
                self.lives -= 1
                if self.lives == 0:
                    return HIT_REWARD + WIN_BONUS, True, True
                self._spawn_runner()
                return HIT_REWARD, False, False
        self._move_runner()
        # Pursuit shaping keeps the sparse hit reward reachable for random early policies.
        return before - self._dist(), False, False

    def _move_runner(self):
        dx = self.runner[0] - self.agent[0]
        dy = self.runner[1] - self.agent[1]
        n = math.hypot(dx, dy)
        if n < 1e-12:
            return
        vx, vy = dx / n, dy / n
        # Drop the velocity component that would push into a nearby wall, keep sliding along it.
        if (self.runner[0] < WALL_MARGIN and vx < 0) or (self.runner[0] > 1 - WALL_MARGIN and vx > 0):
            vx = 0.0
        if (self.runner[1] < WALL_MARGIN and vy < 0) or (self.runner[1] > 1 - WALL_MARGIN and vy > 0):
            vy = 0.0
        m = math.hypot(vx, vy)
        if m < 1e-12:
            return
        self.runner[0] = clip01(self.runner[0] + RUNNER_STEP * vx / m)
        self.runner[1] = clip01(self.runner[1] + RUNNER_STEP * vy / m)

    def observe(self):
        dx = self.runner[0] - self.agent[0]
        dy = self.runner[1] - self.agent[1]
        return np.array([
            scale01(self.agent[0]), scale01(self.agent[1]),
            scale01(self.runner[0]), scale01(self.runner[1]),
            dx, dy,
            scale01(self._dist() / SQRT2),
            scale01(self.lives / RUNNER_LIVES),
        ])

    def state_dict(self):
        return {"t": self.t, "agent": list(self.agent), "runner": list(self.runner),
                "runner_lives": self.lives}

    def scripted_action(self):
        bearing = math.atan2(self.runner[1] - self.agent[1], self.runner[0] - self.agent[0])
        return (1 if self._dist() <= ATTACK_RANGE else 0), np.array([bearing])
