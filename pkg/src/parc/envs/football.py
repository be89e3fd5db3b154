from __future__ import annotations

import math

import numpy as np

from ..action_space import make_schema
from .base import WIN_REWARD, Env, clip01, scale01

DASH_DIST = 0.03
KICK_SPEED = 0.08
KICKABLE = 0.06
BALL_DECAY = 0.97
GOAL_Y = (0.4, 0.6)
GOAL = (1.0, 0.5)
FIRST_TOUCH = 0.5
OUT_PENALTY = -1.0
SQRT2 = math.sqrt(2.0)


class Football(Env):
    """Score on an empty goal from the left half of a unit field.

    The goal mouth is the segment x = 1, y in [0.4, 0.6]. Heading is set by
    TURN and observed, but DASH and KICK take absolute directions.
    """

    name = "football"
    time_limit = 250
    schema = make_schema(
        ("DASH", [("power", 0.0, 1.0), ("direction", -math.pi, math.pi)]),
        ("TURN", [("direction", -math.pi, math.pi)]),
        ("KICK", [("power", 0.0, 1.0), ("direction", -math.pi, math.pi)]),
    )
    obs_dim = 15

    def _reset(self):
        u = self.rng.uniform(5)
        self.agent = [0.05 + 0.15 * float(u[0]), 0.3 + 0.4 * float(u[1])]
        self.heading = math.pi * (2.0 * float(u[2]) - 1.0)
        self.ball = [0.3 + 0.15 * float(u[3]), 0.35 + 0.3 * float(u[4])]
        self.ball_vel = [0.0, 0.0]
        self.touched = False

    def _agent_ball(self) -> float:
        return math.hypot(self.ball[0] - self.agent[0], self.ball[1] - self.agent[1])

    def _ball_goal(self) -> float:
        return math.hypot(GOAL[0] - self.ball[0], GOAL[1] - self.ball[1])

    def _step(self, a, x):
        ab0, bg0 = self._agent_ball(), self._ball_goal()
        reward = 0.0
        if a == 0:
            p, d = float(x[0]), float(x[1])
            self.agent[0] = clip01(self.agent[0] + DASH_DIST * p * math.cos(d))
            self.agent[1] = clip01(self.agent[1] + DASH_DIST * p * math.sin(d))
        elif a == 1:
            self.heading = float(x[0])
        elif ab0 <= KICKABLE:
            p, d = float(x[0]), float(x[1])
            self.ball_vel = [KICK_SPEED * p * math.cos(d), KICK_SPEED * p * math.sin(d)]
            if not self.touched:
                self.touched = True
                reward += FIRST_TOUCH

        bx, by = self.ball
        nx, ny = bx + self.ball_vel[0], by + self.ball_vel[1]
        self.ball = [nx, ny]
        self.ball_vel = [self.ball_vel[0] * BALL_DECAY, self.ball_vel[1] * BALL_DECAY]
        if nx >= 1.0:
            # y where the ball's path crosses the goal line
            cy = by + (ny - by) * (1.0 - bx) / (nx - bx)
            if GOAL_Y[0] <= cy <= GOAL_Y[1]:
                return reward + WIN_REWARD, True, True
            return reward + OUT_PENALTY, True, False
        if nx < 0.0 or ny < 0.0 or ny > 1.0:
            return reward + OUT_PENALTY, True, False
        shaping = 0.5 * (ab0 - self._agent_ball()) + 0.5 * (bg0 - self._ball_goal())
        return reward + shaping, False, False

    def observe(self):
        bx = min(max(self.ball[0], 0.0), 1.0)
        by = min(max(self.ball[1], 0.0), 1.0)
        return np.array([
            scale01(self.agent[0]), scale01(self.agent[1]),
            math.cos(self.heading), math.sin(self.heading),
            scale01(bx), scale01(by),
            self.ball_vel[0] / KICK_SPEED, self.ball_vel[1] / KICK_SPEED,
            bx - self.agent[0], by - self.agent[1],
            GOAL[0] - bx, GOAL[1] - by,
            scale01(min(self._agent_ball(), SQRT2) / SQRT2),
            scale01(min(self._ball_goal(), SQRT2) / SQRT2),
            1.0 if self.touched else -1.0,
        ])

    def state_dict(self):
        return {"t": self.t, "agent": list(self.agent), "heading": self.heading,
                "ball": list(self.ball), "ball_vel": list(self.ball_vel), "touched": self.touched}

    def scripted_action(self):
        if self._agent_ball() <= KICKABLE:
            d = math.atan2(GOAL[1] - self.ball[1], GOAL[0] - self.ball[0])
            return 2, np.array([1.0, d])
        d = math.atan2(self.ball[1] - self.agent[1], self.ball[0] - self.agent[0])
        return 0, np.array([1.0, d])
