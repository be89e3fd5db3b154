"""DQN over a discretized parameterized action space.

Every continuous parameter is binned and the per-action Cartesian products
are flattened into one list of atomic actions; Q-learning then runs over
that flat set with experience replay, epsilon-greedy exploration and a
periodically synced target network.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .action_space import PAPER_BINS, HybridAction, discretize
from .envs import Env, make_env
from .hppo import EpisodeWindow, Episode, TrainStats, TrainingError
from .numerics import AdamState, MlpParams, Rng, adam_step, mlp_backward, mlp_forward
from .policy import save_checkpoint


@dataclass
class DqnConfig:
    batch_size: int = 32
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 50_000
    sync_every: int = 500
    lr: float = 1e-4
    buffer_size: int = 10_000
    learning_starts: int = 1_000
    train_every: int = 1
    log_every: int = 64
    max_iterations: int = 1000
    max_env_steps: int | None = None
    seed: int = 0
    hidden: tuple[int, ...] = (256, 256, 128, 64)
    target_success: float | None = None
    success_window: int = 100
    checkpoint_every: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.batch_size < 1 or self.batch_size > self.buffer_size:
            raise ValueError("batch_size must be in [1, buffer_size]")
        if not 0.0 < self.gamma <= 1.0 or self.lr <= 0:
            raise ValueError("need gamma in (0, 1] and lr > 0")
        if self.sync_every < 1 or self.train_every < 1 or self.log_every < 1:
            raise ValueError("sync_every, train_every and log_every must be >= 1")

    def epsilon(self, step: int) -> float:
        frac = min(1.0, step / self.eps_decay_steps) if self.eps_decay_steps > 0 else 1.0
        return self.eps_start + frac * (self.eps_end - self.eps_start)


@dataclass
class Transitions:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminal: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions."""

    def __init__(self, capacity: int, obs_dim: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, obs_dim))
        self.a = np.zeros(capacity, dtype=int)
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, obs_dim))
        self.term = np.zeros(capacity, dtype=bool)
        self.pos = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, s, a: int, r: float, s2, terminal: bool) -> None:
        i = self.pos
        self.s[i], self.a[i], self.r[i], self.s2[i], self.term[i] = s, a, r, s2, terminal
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: Rng) -> Transitions:
        if n > self.size:
            raise ValueError(f"cannot sample {n} from {self.size} transitions")
        idx = rng.choice(self.size, n)
        return Transitions(self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.term[idx])


def init_q(obs_dim: int, n_actions: int, rng: Rng, hidden: Sequence[int] = (256, 256, 128, 64)) -> MlpParams:
    return MlpParams.init([obs_dim] + list(hidden) + [n_actions], rng)


def td_targets(batch: Transitions, target_q: MlpParams, gamma: float) -> np.ndarray:
    """y = r for terminal transitions, r + gamma * max_a' Q_target(s', a') otherwise."""
    q_next, _ = mlp_forward(target_q, batch.next_states)
    return batch.rewards + gamma * np.where(batch.terminal, 0.0, q_next.max(axis=1))


def q_loss(q: MlpParams, batch: Transitions, targets: np.ndarray) -> tuple[float, MlpParams]:
    """Mean squared TD error of the taken actions and its gradient."""
    qs, cache = mlp_forward(q, batch.states)
    B = len(targets)
    rows = np.arange(B)
    err = qs[rows, batch.actions] - targets
    dq = np.zeros_like(qs)
    dq[rows, batch.actions] = 2.0 * err / B
    grads, _ = mlp_backward(q, cache, dq)
    return float(np.mean(err * err)), grads


@dataclass
class DqnAgent:
    q: MlpParams
    target: MlpParams
    opt: AdamState
    updates: int = 0

    @classmethod
    def create(cls, obs_dim: int, n_actions: int, config: DqnConfig, rng: Rng) -> "DqnAgent":
        q = init_q(obs_dim, n_actions, rng, config.hidden)
        return cls(q, q.copy(), AdamState.for_params(q.arrays()))

    def sync(self) -> None:
        self.target = self.q.copy()


def dqn_update(agent: DqnAgent, buffer: ReplayBuffer, config: DqnConfig, rng: Rng) -> float | None:
    """One Adam step on a uniform batch; ``None`` when the buffer is still too small."""
    if len(buffer) < config.batch_size:
        return None
    batch = buffer.sample(config.batch_size, rng)
    y = td_targets(batch, agent.target, config.gamma)
    loss, grads = q_loss(agent.q, batch, y)
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite Q loss after {agent.updates} updates")
    adam_step(agent.q.arrays(), grads.arrays(), agent.opt, config.lr)
    agent.updates += 1
    if agent.updates % config.sync_every == 0:
        agent.sync()
    return loss


def epsilon_greedy(q: MlpParams, state: np.ndarray, eps: float, rng: Rng) -> int:
    if rng.uniform() < eps:
        return rng.integers(q.out_dim)
    return int(np.argmax(mlp_forward(q, state)[0]))


@dataclass
class DqnResult:
    stats: list[TrainStats]
    agent: DqnAgent
    atomic: list[HybridAction]
    elapsed: float = 0.0


def train_dqn(env_name: str, bins: dict[str, Sequence[int]] | None, config: DqnConfig,
              on_iteration: Callable[[TrainStats, DqnAgent], None] | None = None,
              env: Env | None = None, checkpoint_path: str | Path | None = None) -> DqnResult:
    """Epsilon-greedy interaction with replay; one stats row per ``log_every`` env steps."""
    env = env if env is not None else make_env(env_name)
    if bins is None:
        bins = PAPER_BINS.get(env_name, {})
    atomic = discretize(env.schema, bins)
    seed = config.seed
    agent = DqnAgent.create(env.obs_dim, len(atomic), config, Rng(seed, 0))
    act_rng, env_rng, upd_rng = Rng(seed, 1), Rng(seed, 2), Rng(seed, 3)
    buffer = ReplayBuffer(config.buffer_size, env.obs_dim)
    window = EpisodeWindow(config.success_window)
    stats: list[TrainStats] = []
    obs = env.reset(env_rng)
    ep_reward, ep_len = 0.0, 0
    steps = 0
    losses: list[float] = []
    t0 = time.process_time()
    meta = {"algo": "dqn", "bins": {k: list(v) for k, v in bins.items()}}
    for it in range(config.max_iterations):
        for _ in range(config.log_every):
            i = epsilon_greedy(agent.q, obs, config.epsilon(steps), act_rng)
            act = atomic[i]
            out = env.step(act.a, act.x_a)
            steps += 1
            ep_reward += out.reward
            ep_len += 1
            buffer.push(obs, i, out.reward, out.obs, out.done and not out.truncated)
            if out.done:
                window.add(Episode(ep_reward, ep_len, out.win))
                obs = env.reset(env_rng)
                ep_reward, ep_len = 0.0, 0
            else:
                obs = out.obs
            if steps >= config.learning_starts and steps % config.train_every == 0:
                loss = dqn_update(agent, buffer, config, upd_rng)
                if loss is not None:
                    losses.append(loss)
        row = TrainStats(it, steps, window.total, window.success_rate, window.mean_reward,
                         loss_v=float(np.mean(losses)) if losses else 0.0)
        losses.clear()
        stats.append(row)
        if on_iteration is not None:
            on_iteration(row, agent)
        if checkpoint_path and config.checkpoint_every and (it + 1) % config.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, env.schema, {"q": agent.q}, {**meta, "iteration": it})
        if config.max_env_steps is not None and steps >= config.max_env_steps:
            break
        if config.target_success is not None and window.full and window.success_rate >= config.target_success:
            break
    if checkpoint_path:
        save_checkpoint(checkpoint_path, env.schema, {"q": agent.q}, {**meta, "iteration": len(stats) - 1})
    return DqnResult(stats, agent, atomic, time.process_time() - t0)
