from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..action_space import ActionSchema
from ..numerics import DomainError, Rng

STEP_PENALTY = -0.01
WIN_REWARD = 5.0


class EnvContractError(RuntimeError):
    """Raised when ``step`` is called before ``reset`` or after the episode ended."""


@dataclass
class EnvOutcome:
    obs: np.ndarray
    reward: float
    done: bool
    truncated: bool = False
    win: bool = False


def wrap_angle(x: float) -> float:
    """Map to (-pi, pi]."""
    y = math.fmod(x + math.pi, 2.0 * math.pi)
    if y <= 0.0:
        y += 2.0 * math.pi
    return y - math.pi


def clip01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def scale01(x: float) -> float:
    """[0, 1] -> [-1, 1]."""
    return 2.0 * x - 1.0


class Env:
    """Episodic simulator over a parameterized action schema.

    ``reset`` binds the Rng handle that drives all subsequent randomness of
    the episode. ``step`` consumes only the selected action index and its own
    parameter vector, clamped here to the schema bounds.
    """

    name = "env"
    time_limit = 200
    step_penalty = STEP_PENALTY
    schema: ActionSchema
    obs_dim: int

    def __init__(self):
        self.rng: Rng | None = None
        self.t = 0
        self.done = True

    def reset(self, rng: Rng) -> np.ndarray:
        self.rng = rng
        self.t = 0
        self.done = False
        self._reset()
        return self.observe()

    def step(self, a: int, x) -> EnvOutcome:
        if self.done:
            raise EnvContractError(f"{self.name}: step() after episode end; call reset()")
        if not 0 <= a < self.schema.k:
            raise DomainError(f"{self.name}: action index {a} out of range [0, {self.schema.k})")
        x = self.schema.clamp(a, np.asarray(x, dtype=float).reshape(-1)) if self.schema.actions[a].dim else ()
        self.t += 1
        reward, terminal, win = self._step(a, x)
        reward += self.step_penalty
        truncated = not terminal and self.t >= self.time_limit
        self.done = terminal or truncated
        return EnvOutcome(self.observe(), float(reward), self.done, truncated, win)

    # subclass hooks ------------------------------------------------------

    def _reset(self) -> None:
        raise NotImplementedError

    def _step(self, a: int, x) -> tuple[float, bool, bool]:
        raise NotImplementedError

    def observe(self) -> np.ndarray:
        raise NotImplementedError

    def state_dict(self) -> dict:
        raise NotImplementedError

    def scripted_action(self) -> tuple[int, np.ndarray]:
        """A hand-coded controller that wins every episode."""
        raise NotImplementedError
