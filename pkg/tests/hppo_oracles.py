"""Independent reference implementations and fixtures for the H-PPO tests."""

from __future__ import annotations

import numpy as np

from parc.hppo import Minibatch, RolloutBuffer
from parc.numerics import MlpParams, Rng, finite_diff_grad
from parc.policy import init_critic, init_policy, policy_forward, sample_action

SMALL = (12, 10, 8, 6)

# one-step toy problems need no long rollouts; this is the small-buffer setting
BANDIT = dict(horizon=64, segments_per_iter=1, minibatch_size=32, lr_actor=3e-4, lr_critic=3e-4)


def direct_sum_advantages(rewards, values, dones, boot_values, last_value, gamma):
    """A_t as an explicit forward sum: discounted rewards until the first done or the horizon."""
    T = len(rewards)
    adv = np.zeros(T)
    for t in range(T):
        total, disc = 0.0, 1.0
        j = t
        while True:
            total += disc * rewards[j]
            disc *= gamma
            if dones[j]:
                total += disc * boot_values[j]
                break
            j += 1
            if j == T:
                total += disc * last_value
                break
        adv[t] = total - values[t]
    return adv


def random_buffer(rng: Rng, T: int, done_p: float = 0.1) -> RolloutBuffer:
    dones = rng.uniform(T) < done_p
    truncated = dones & (rng.uniform(T) < 0.5)
    return RolloutBuffer(
        states=np.zeros((T, 1)), actions=np.zeros(T, dtype=int), params=np.zeros((T, 0)),
        logp_d=np.zeros(T), logp_c=np.zeros(T), rewards=rng.normal(T) * 2,
        dones=dones, truncated=truncated, wins=np.zeros(T, dtype=bool),
        values=rng.normal(T), boot_values=np.where(truncated, rng.normal(T), 0.0),
        last_value=float(rng.normal(1)[0]),
    )


def make_minibatch(schema, obs_dim: int, B: int, seed: int, drift: float = 0.05):
    """Minibatch sampled from one policy, paired with a perturbed copy to evaluate it under."""
    rng = Rng(seed)
    pol = init_policy(schema, obs_dim, rng, SMALL, logstd_init=-0.5)
    critic = init_critic(obs_dim, rng, SMALL)
    # bigger output weights so ratios move away from 1 and both clip branches occur
    for net in (pol.discrete_head, pol.continuous_head):
        net.weights[-1] *= 30.0
    states = rng.normal(B * obs_dim).reshape(B, obs_dim)
    acts, params, lpd, lpc = [], [], [], []
    for s in states:
        act, d, c = sample_action(policy_forward(pol, None, s), schema, rng)
        acts.append(act.a)
        params.append(np.concatenate(act.full_params) if schema.total_dim else np.zeros(0))
        lpd.append(d)
        lpc.append(c)
    new = pol.copy()
    for net in new.nets().values():
        net.set_flat(net.flat() + drift * rng.normal(net.n_params))
    mb = Minibatch(states, np.array(acts), np.array(params).reshape(B, schema.total_dim),
                   np.array(lpd), np.array(lpc), rng.normal(B), rng.normal(B) * 3)
    return new, critic, mb


def fd_check(loss_fn, nets: list[MlpParams], grads: list[MlpParams], rtol=1e-4, atol=1e-7):
    """Compare analytic grads of ``loss_fn()`` w.r.t. every parameter of ``nets`` with central differences."""
    sizes = [n.n_params for n in nets]
    base = np.concatenate([n.flat() for n in nets])

    def f(vec):
        off = 0
        for n, k in zip(nets, sizes):
            n.set_flat(vec[off:off + k])
            off += k
        return loss_fn()

    num = finite_diff_grad(f, base.copy())
    f(base)
    ana = np.concatenate([g.flat() for g in grads])
    bad = np.abs(ana - num) > atol + rtol * np.abs(num)
    return int(bad.sum()), float(np.max(np.abs(ana - num)))
