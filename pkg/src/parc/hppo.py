"""Hybrid PPO: clipped-surrogate updates of a discrete and a continuous actor.

The two actors are treated as separate distributions. Each has its own
probability ratio and its own clipped surrogate, both driven by the same
T-step advantage estimate from the state-value critic. The discrete loss,
the continuous loss and the value loss are applied as three sequential
gradient steps per minibatch.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .envs import Env, make_env
from .numerics import (
    LOG_2PI,
    LOGSTD_MAX,
    LOGSTD_MIN,
    AdamState,
    MlpParams,
    Rng,
    adam_step,
    clip_global_norm,
    log_softmax,
    mlp_backward,
    mlp_forward,
)
from .policy import (
    ActorSet,
    HybridPolicyParams,
    backward_continuous,
    backward_discrete,
    continuous_output_grad,
    continuous_terms,
    discrete_terms,
    forward_batch,
    init_critic,
    init_policy,
    policy_forward,
    sample_action,
    save_checkpoint,
    sample_tree_action,
    selection_mask,
)

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


class RolloutError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    gamma: float = 0.99
    clip_eps: float = 0.2
    horizon: int = 64
    segments_per_iter: int = 8
    epochs_per_iter: int = 4
    minibatch_size: int = 128
    lr_actor: float = 1e-4
    lr_critic: float = 3e-4
    entropy_coef_d: float = 0.01
    entropy_coef_c: float = 0.01
    value_coef: float = 0.5
    max_iterations: int = 1000
    seed: int = 0
    hidden: tuple[int, ...] = (256, 256, 128, 64)
    shared_layers: int = 2
    logstd_init: float = 0.0
    normalize_advantages: bool = True
    max_grad_norm: float | None = None
    max_env_steps: int | None = None
    target_success: float | None = None
    success_window: int = 100
    checkpoint_every: int = 0

    @property
    def batch_size(self) -> int:
        """Samples per update: ``segments_per_iter`` rollouts of ``horizon`` steps each."""
        return self.horizon * self.segments_per_iter

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        for name in ("clip_eps", "lr_actor", "lr_critic"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if min(self.horizon, self.segments_per_iter, self.epochs_per_iter, self.minibatch_size) < 1:
            raise ValueError("horizon, segments_per_iter, epochs_per_iter and minibatch_size must be >= 1")
        if self.minibatch_size > self.batch_size:
            raise ValueError("minibatch_size must not exceed horizon * segments_per_iter")
        if self.max_iterations < 0 or self.success_window < 1:
            raise ValueError("max_iterations must be >= 0 and success_window >= 1")


# --------------------------------------------------------------------------- rollouts


@dataclass
class Episode:
    reward: float
    length: int
    win: bool


class EnvRunner:
    """Keeps an environment stepping across rollouts, auto-resetting on episode end."""

    def __init__(self, env: Env, rng: Rng):
        self.env = env
        self.rng = rng
        self.obs = env.reset(rng)
        self.ep_reward = 0.0
        self.ep_len = 0

    def step(self, a: int, x) -> tuple:
        out = self.env.step(a, x)
        self.ep_reward += out.reward
        self.ep_len += 1
        episode = None
        final_obs = out.obs
        if out.done:
            episode = Episode(self.ep_reward, self.ep_len, out.win)
            self.obs = self.env.reset(self.rng)
            self.ep_reward, self.ep_len = 0.0, 0
        else:
            self.obs = out.obs
        return out, final_obs, episode


@dataclass
class RolloutBuffer:
    states: np.ndarray
    actions: np.ndarray
    params: np.ndarray          # raw full parameter vectors, (T, M)
    logp_d: np.ndarray
    logp_c: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    truncated: np.ndarray
    wins: np.ndarray
    values: np.ndarray
    boot_values: np.ndarray     # V(final obs) where a time limit cut the episode, else 0
    last_value: float           # V(s_T)
    episodes: list[Episode] = field(default_factory=list)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.rewards)

    @classmethod
    def concat(cls, bufs: Sequence["RolloutBuffer"]) -> "RolloutBuffer":
        """Join consecutive segments whose advantages were already computed one by one."""
        if len(bufs) == 1:
            return bufs[0]
        if any(b.advantages is None for b in bufs):
            raise TrainingError("compute_advantages must run on every segment before concat")
        cat = {name: np.concatenate([getattr(b, name) for b in bufs])
               for name in ("states", "actions", "params", "logp_d", "logp_c", "rewards", "dones",
                            "truncated", "wins", "values", "boot_values", "advantages", "returns")}
        return cls(**cat, last_value=bufs[-1].last_value, episodes=[e for b in bufs for e in b.episodes])


def collect_rollout(runner: EnvRunner | Env, policy: HybridPolicyParams, critic: MlpParams,
                    config: TrainConfig, rng: Rng, env_rng: Rng | None = None) -> RolloutBuffer:
    """Run the stochastic policy for exactly ``config.horizon`` steps."""
    if isinstance(runner, Env):
        runner = EnvRunner(runner, env_rng or Rng(config.seed, 2))
    T, schema = config.horizon, policy.schema
    M = schema.total_dim
    obs_dim = policy.obs_dim
    buf = RolloutBuffer(
        states=np.zeros((T, obs_dim)), actions=np.zeros(T, dtype=int), params=np.zeros((T, M)),
        logp_d=np.zeros(T), logp_c=np.zeros(T), rewards=np.zeros(T),
        dones=np.zeros(T, dtype=bool), truncated=np.zeros(T, dtype=bool), wins=np.zeros(T, dtype=bool),
        values=np.zeros(T), boot_values=np.zeros(T), last_value=0.0,
    )
    cut_obs: list[tuple[int, np.ndarray]] = []
    for t in range(T):
        s = runner.obs
        out = policy_forward(policy, None, s)
        action, lpd, lpc = sample_action(out, schema, rng)
        try:
            res, final_obs, episode = runner.step(action.a, action.x_a)
        except Exception as exc:
            raise RolloutError(f"environment fault at rollout step {t}: {exc}") from exc
        buf.states[t] = s
        buf.actions[t] = action.a
        if M:
            buf.params[t] = np.concatenate(action.full_params)
        buf.logp_d[t], buf.logp_c[t] = lpd, lpc
        buf.rewards[t] = res.reward
        buf.dones[t], buf.truncated[t], buf.wins[t] = res.done, res.truncated, res.win
        if res.truncated:
            cut_obs.append((t, final_obs))
        if episode is not None:
            buf.episodes.append(episode)
    # The critic is fixed during the rollout, so its values are computed in one batched pass.
    extra = np.array([runner.obs] + [o for _, o in cut_obs])
    buf.values[:] = mlp_forward(critic, buf.states)[0][:, 0]
    tail = mlp_forward(critic, extra)[0][:, 0]
    buf.last_value = float(tail[0])
    for (t, _), v in zip(cut_obs, tail[1:]):
        buf.boot_values[t] = v
    return buf


def compute_advantages(buf: RolloutBuffer, gamma: float) -> RolloutBuffer:
    """T-step bootstrapped advantages, cut at episode ends.

    A_t = r_t + g r_{t+1} + ... + g^{T-t-1} r_{T-1} + g^{T-t} V(s_T) - V(s_t), where
    a terminal step bootstraps with 0 and a time-limit step with V of its final state.
    """
    T = len(buf)
    ret = np.zeros(T)
    g = buf.last_value
    for t in range(T - 1, -1, -1):
        if buf.dones[t]:
            g = buf.rewards[t] + gamma * buf.boot_values[t]
        else:
            g = buf.rewards[t] + gamma * g
        ret[t] = g
    buf.returns = ret
    buf.advantages = ret - buf.values
    return buf


# --------------------------------------------------------------------------- losses


def clip_surrogate(ratio, adv, clip_eps):
    """min(r A, clip(r, 1 - eps, 1 + eps) A), elementwise."""
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv)


def clip_surrogate_dratio(ratio, adv, clip_eps):
    """Derivative of ``clip_surrogate`` w.r.t. the ratio (A on the unclipped branch, else 0)."""
    unclipped = ratio * adv <= np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv
    return np.where(unclipped, adv, 0.0)


@dataclass
class Minibatch:
    states: np.ndarray
    actions: np.ndarray
    params: np.ndarray
    logp_d: np.ndarray
    logp_c: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    @classmethod
    def from_buffer(cls, buf: RolloutBuffer, idx, advantages: np.ndarray | None = None) -> "Minibatch":
        adv = buf.advantages if advantages is None else advantages
        return cls(buf.states[idx], buf.actions[idx], buf.params[idx], buf.logp_d[idx],
                   buf.logp_c[idx], adv[idx], buf.returns[idx])


def _zero_grads(policy: HybridPolicyParams, critic: MlpParams | None) -> dict[str, MlpParams]:
    grads = {k: v.zeros_like() for k, v in policy.nets().items()}
    if critic is not None:
        grads["critic"] = critic.zeros_like()
    return grads


def discrete_loss(policy: HybridPolicyParams, critic: MlpParams | None, mb: Minibatch,
                  clip_eps: float = 0.2, entropy_coef: float = 0.01):
    """-mean(clipped surrogate of the discrete ratio) - c * mean(discrete entropy).

    Returns ``(loss, grads, info)``; grads cover every network, and only the
    encoder and discrete head can be non-zero.
    """
    fwd = forward_batch(policy, mb.states)
    logp, ent, dlogp, dent = discrete_terms(fwd, mb.actions)
    B = len(mb.actions)
    ratio = np.exp(logp - mb.logp_d)
    surr = clip_surrogate(ratio, mb.advantages, clip_eps)
    loss = float(-surr.mean() - entropy_coef * ent.mean())
    coef = clip_surrogate_dratio(ratio, mb.advantages, clip_eps) * ratio
    dlogits = -(coef[:, None] * dlogp + entropy_coef * dent) / B
    grads = _zero_grads(policy, critic)
    grads["encoder"], grads["discrete_head"] = backward_discrete(policy, fwd, dlogits)
    return loss, grads, {"entropy": float(ent.mean()), "ratio": ratio, "dlogits": dlogits}


def continuous_loss(policy: HybridPolicyParams, critic: MlpParams | None, mb: Minibatch,
                    clip_eps: float = 0.2, entropy_coef: float = 0.01):
    """Same form for the chosen action's Gaussian; parameter-free choices have ratio 1."""
    fwd = forward_batch(policy, mb.states)
    sel = selection_mask(policy.schema, mb.actions)
    logp, ent, (dmu, dls), dent = continuous_terms(fwd, sel, mb.params)
    B = len(mb.actions)
    ratio = np.exp(logp - mb.logp_c)
    surr = clip_surrogate(ratio, mb.advantages, clip_eps)
    loss = float(-surr.mean() - entropy_coef * ent.mean())
    coef = (clip_surrogate_dratio(ratio, mb.advantages, clip_eps) * ratio)[:, None]
    dmean = -coef * dmu / B
    dlogstd = -(coef * dls + entropy_coef * dent) / B
    dout = continuous_output_grad(policy, fwd, dmean, dlogstd)
    grads = _zero_grads(policy, critic)
    grads["encoder"], grads["continuous_head"] = backward_continuous(policy, fwd, dout)
    return loss, grads, {"entropy": float(ent.mean()), "ratio": ratio, "dout": dout}


def value_loss(critic: MlpParams, mb: Minibatch, value_coef: float = 0.5):
    """value_coef * mean((V(s) - target)^2); only the critic receives gradients."""
    v, cache = mlp_forward(critic, mb.states)
    err = v[:, 0] - mb.returns
    B = len(err)
    loss = float(value_coef * np.mean(err * err))
    g, _ = mlp_backward(critic, cache, (2.0 * value_coef * err / B)[:, None])
    return loss, {"critic": g}, {}


# --------------------------------------------------------------------------- agent / update


@dataclass
class HppoAgent:
    policy: HybridPolicyParams
    critic: MlpParams
    opt_d: AdamState
    opt_c: AdamState
    opt_v: AdamState

    @classmethod
    def create(cls, schema, obs_dim: int, config: TrainConfig, rng: Rng) -> "HppoAgent":
        policy = init_policy(schema, obs_dim, rng, config.hidden, config.shared_layers, config.logstd_init)
        critic = init_critic(obs_dim, rng, config.hidden)
        return cls.from_params(policy, critic)

    @classmethod
    def from_params(cls, policy: HybridPolicyParams, critic: MlpParams) -> "HppoAgent":
        return cls(
            policy, critic,
            AdamState.for_params(policy.encoder.arrays() + policy.discrete_head.arrays()),
            AdamState.for_params(policy.encoder.arrays() + policy.continuous_head.arrays()),
            AdamState.for_params(critic.arrays()),
        )

    def nets(self) -> dict[str, MlpParams]:
        return {**self.policy.nets(), "critic": self.critic}


def _apply(nets: Sequence[MlpParams], grads: Sequence[MlpParams], state: AdamState, lr: float,
           max_norm: float | None) -> None:
    params = [a for n in nets for a in n.arrays()]
    gs = [a for g in grads for a in g.arrays()]
    if max_norm is not None:
        clip_global_norm(gs, max_norm)
    adam_step(params, gs, state, lr)


def _snapshot(agent: HppoAgent, **losses) -> str:
    norms = {k: float(np.linalg.norm(n.flat())) for k, n in agent.nets().items()}
    return f"losses={losses} param_norms={norms}"


def update(agent: HppoAgent, buf: RolloutBuffer, config: TrainConfig, rng: Rng) -> dict:
    """Epochs of shuffled minibatch updates; three separate Adam steps per minibatch."""
    if buf.advantages is None:
        raise TrainingError("compute_advantages must run before update")
    adv = buf.advantages
    if config.normalize_advantages and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    T = len(buf)
    pol, critic = agent.policy, agent.critic
    sums = {"loss_d": 0.0, "loss_c": 0.0, "loss_v": 0.0, "entropy_d": 0.0, "entropy_c": 0.0}
    n = 0
    for _ in range(config.epochs_per_iter):
        perm = rng.permutation(T)
        for start in range(0, T, config.minibatch_size):
            mb = Minibatch.from_buffer(buf, perm[start:start + config.minibatch_size], adv)
            ld, gd, info_d = discrete_loss(pol, None, mb, config.clip_eps, config.entropy_coef_d)
            if not math.isfinite(ld):
                raise TrainingError("non-finite discrete loss; " + _snapshot(agent, loss_d=ld))
            _apply([pol.encoder, pol.discrete_head], [gd["encoder"], gd["discrete_head"]],
                   agent.opt_d, config.lr_actor, config.max_grad_norm)
            lc, gc, info_c = continuous_loss(pol, None, mb, config.clip_eps, config.entropy_coef_c)
            if not math.isfinite(lc):
                raise TrainingError("non-finite continuous loss; " + _snapshot(agent, loss_c=lc))
            if pol.schema.total_dim:
                _apply([pol.encoder, pol.continuous_head], [gc["encoder"], gc["continuous_head"]],
                       agent.opt_c, config.lr_actor, config.max_grad_norm)
            lv, gv, _ = value_loss(critic, mb, config.value_coef)
            if not math.isfinite(lv):
                raise TrainingError("non-finite value loss; " + _snapshot(agent, loss_v=lv))
            _apply([critic], [gv["critic"]], agent.opt_v, config.lr_critic, config.max_grad_norm)
            sums["loss_d"] += ld
            sums["loss_c"] += lc
            sums["loss_v"] += lv
            sums["entropy_d"] += info_d["entropy"]
            sums["entropy_c"] += info_c["entropy"]
            n += 1
    return {k: v / n for k, v in sums.items()}


# --------------------------------------------------------------------------- training loop


@dataclass
class TrainStats:
    iteration: int
    env_steps: int
    episodes: int
    success_rate: float
    mean_ep_reward: float
    loss_d: float = 0.0
    loss_c: float = 0.0
    loss_v: float = 0.0
    entropy_d: float = 0.0
    entropy_c: float = 0.0


class EpisodeWindow:
    """Trailing window of completed episodes for success-rate and reward tracking."""

    def __init__(self, size: int = 100):
        self.size = size
        self.wins: deque[bool] = deque(maxlen=size)
        self.rewards: deque[float] = deque(maxlen=size)
        self.total = 0

    def add(self, ep: Episode) -> None:
        self.wins.append(ep.win)
        self.rewards.append(ep.reward)
        self.total += 1

    @property
    def full(self) -> bool:
        return len(self.wins) == self.size

    @property
    def success_rate(self) -> float:
        return sum(self.wins) / len(self.wins) if self.wins else 0.0

    @property
    def mean_reward(self) -> float:
        return sum(self.rewards) / len(self.rewards) if self.rewards else 0.0


@dataclass
class TrainResult:
    stats: list[TrainStats]
    agent: HppoAgent
    elapsed: float = 0.0


def train(env_name: str, config: TrainConfig, on_iteration: Callable[[TrainStats, HppoAgent], None] | None = None,
          env: Env | None = None, checkpoint_path: str | Path | None = None) -> TrainResult:
    """collect_rollout -> compute_advantages -> update, until an iteration, step or success budget is hit."""
    env = env if env is not None else make_env(env_name)
    seed = config.seed
    agent = HppoAgent.create(env.schema, env.obs_dim, config, Rng(seed, 0))
    act_rng, env_rng, upd_rng = Rng(seed, 1), Rng(seed, 2), Rng(seed, 3)
    runner = EnvRunner(env, env_rng)
    window = EpisodeWindow(config.success_window)
    stats: list[TrainStats] = []
    steps = 0
    t0 = time.process_time()
    for it in range(config.max_iterations):
        segments = []
        for _ in range(config.segments_per_iter):
            seg = collect_rollout(runner, agent.policy, agent.critic, config, act_rng)
            segments.append(compute_advantages(seg, config.gamma))
        buf = RolloutBuffer.concat(segments)
        losses = update(agent, buf, config, upd_rng)
        steps += len(buf)
        for ep in buf.episodes:
            window.add(ep)
        row = TrainStats(it, steps, window.total, window.success_rate, window.mean_reward, **losses)
        stats.append(row)
        if on_iteration is not None:
            on_iteration(row, agent)
        if checkpoint_path and config.checkpoint_every and (it + 1) % config.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, env.schema, agent.nets(), {"algo": "hppo", "iteration": it})
        if config.max_env_steps is not None and steps >= config.max_env_steps:
            break
        if config.target_success is not None and window.full and window.success_rate >= config.target_success:
            break
    if checkpoint_path:
        save_checkpoint(checkpoint_path, env.schema, agent.nets(),
                        {"algo": "hppo", "iteration": len(stats) - 1})
    return TrainResult(stats, agent, time.process_time() - t0)


# --------------------------------------------------------------------------- actor sets


def _tree_node_terms(y: np.ndarray, head, choices, on_path):
    """Log-probs of stored per-node choices and their gradients w.r.t. the head net's outputs."""
    B = y.shape[0]
    dy = np.zeros_like(y)
    if head.kind == "discrete":
        lp = log_softmax(y[:, head.out])
        c = np.asarray(choices, dtype=int)
        logp = lp[np.arange(B), c]
        g = -np.exp(lp)
        g[np.arange(B), c] += 1.0
        dy[:, head.out] = g * on_path[:, None]
        return logp * on_path, dy
    x = np.stack(choices)
    raw_ls = y[:, head.ls_out]
    ls = np.clip(raw_ls, LOGSTD_MIN, LOGSTD_MAX) + np.log(head.half)
    mean = head.center + head.half * y[:, head.out]
    z = (x - mean) * np.exp(-ls)
    logp = (-0.5 * z * z - ls - 0.5 * LOG_2PI).sum(axis=1)
    live = (raw_ls >= LOGSTD_MIN) & (raw_ls <= LOGSTD_MAX)
    dy[:, head.out] = z * np.exp(-ls) * head.half * on_path[:, None]
    dy[:, head.ls_out] = (z * z - 1.0) * live * on_path[:, None]
    return logp * on_path, dy


def train_actor_set_bandit(aset: ActorSet, reward_fn: Callable[[tuple, np.ndarray], float], state: np.ndarray,
                           iterations: int, rng: Rng, batch: int = 64, epochs: int = 4,
                           lr: float = 3e-4, clip_eps: float = 0.2) -> list[float]:
    """PPO on a one-step task over an action tree, each actor updated as its own policy.

    Every node on a sampled path gets its own clipped surrogate with the shared
    (batch-normalized) advantage; nodes off the path get no signal. Returns
    the mean reward per iteration.
    """
    nodes = [(p, h) for p, h in aset.heads.items()]
    opts = {p: AdamState.for_params(aset.encoder.arrays() + h.net.arrays()) for p, h in nodes}
    states = np.repeat(np.asarray(state, dtype=float)[None, :], batch, axis=0)
    history = []
    for _ in range(iterations):
        samples = [sample_tree_action(aset, state, rng) for _ in range(batch)]
        r = np.array([reward_fn(s.path, s.params) for s in samples])
        history.append(float(r.mean()))
        adv = (r - r.mean()) / (r.std() + 1e-8)
        on_path = {p: np.array([float(p in s.logps) for s in samples]) for p, _ in nodes}
        choices = {p: [s.choices[p] for s in samples] for p, _ in nodes}
        old = {p: np.array([s.logps.get(p, 0.0) for s in samples]) for p, _ in nodes}
        for _ in range(epochs):
            for p, head in nodes:
                mask = on_path[p]
                if not mask.any():
                    continue
                h, enc_cache = mlp_forward(aset.encoder, states)
                y, cache = mlp_forward(head.net, h)
                logp, dy = _tree_node_terms(y, head, choices[p], mask)
                ratio = np.exp(logp - old[p])
                coef = clip_surrogate_dratio(ratio, adv, clip_eps) * ratio * mask / mask.sum()
                g_head, dh = mlp_backward(head.net, cache, -coef[:, None] * dy)
                g_enc, _ = mlp_backward(aset.encoder, enc_cache, dh)
                adam_step(aset.encoder.arrays() + head.net.arrays(), g_enc.arrays() + g_head.arrays(),
                          opts[p], lr)
    return history
