"""Policy evaluation and JSON-lines action traces."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np

from ..action_space import PAPER_BINS, discretize
from ..envs import Env
from ..numerics import MlpParams, Rng, mlp_forward
from ..policy import load_checkpoint, policy_forward, policy_from_nets, sample_action

ActFn = Callable[[np.ndarray, Env], tuple[int, np.ndarray]]


class SchemaMismatch(ValueError):
    pass


@dataclass
class EvalReport:
    episodes: int
    wins: int
    mean_episode_reward: float
    steps: int

    @property
    def success_rate(self) -> float:
        return self.wins / self.episodes

    def to_json(self) -> dict:
        return {"episodes": self.episodes, "wins": self.wins, "success_rate": self.success_rate,
                "mean_episode_reward": self.mean_episode_reward, "steps": self.steps}


def hppo_actor(policy, rng: Rng) -> ActFn:
    def act(obs, env):
        action, _, _ = sample_action(policy_forward(policy, None, obs), policy.schema, rng)
        return action.a, action.x_a
    return act


def dqn_actor(q: MlpParams, atomic) -> ActFn:
    def act(obs, env):
        chosen = atomic[int(np.argmax(mlp_forward(q, obs)[0]))]
        return chosen.a, chosen.x_a
    return act


def scripted_actor() -> ActFn:
    return lambda obs, env: env.scripted_action()


def load_actor(path, env: Env, env_name: str, rng: Rng) -> ActFn:
    """Rebuild the acting policy stored in a checkpoint, checking it fits ``env``."""
    schema, nets, meta = load_checkpoint(path)
    if schema.hash() != env.schema.hash():
        raise SchemaMismatch(
            f"checkpoint schema {schema.hash()} does not match env {env_name!r} schema {env.schema.hash()}")
    if meta.get("algo") == "dqn":
        bins = meta.get("bins") or PAPER_BINS.get(env_name, {})
        return dqn_actor(nets["q"], discretize(schema, bins))
    policy, _ = policy_from_nets(schema, nets)
    return hppo_actor(policy, rng)


def _jsonable(v):
    return v.tolist() if isinstance(v, np.ndarray) else float(v)


def evaluate(env: Env, act: ActFn, episodes: int, env_rng: Rng, trace: TextIO | None = None) -> EvalReport:
    wins, total_reward, steps = 0, 0.0, 0
    for ep in range(episodes):
        obs = env.reset(env_rng)
        t, ep_reward = 0, 0.0
        while True:
            state = env.state_dict() if trace is not None else None
            a, x = act(obs, env)
            out = env.step(a, x)
            if trace is not None:
                x_a = np.asarray(x, dtype=float).reshape(-1)[: env.schema.dims[a]]
                trace.write(json.dumps({
                    "episode": ep, "t": t, "state": state, "obs": [float(v) for v in obs], "a": int(a),
                    "action": env.schema.actions[a].name, "x_a": [float(v) for v in x_a],
                    "reward": float(out.reward), "done": bool(out.done), "win": bool(out.win),
                }, default=_jsonable) + "\n")
            ep_reward += out.reward
            t += 1
            if out.done:
                wins += int(out.win)
                break
            obs = out.obs
        steps += t
        total_reward += ep_reward
    return EvalReport(episodes, wins, total_reward / episodes, steps)
