import numpy as np
import pytest

from hppo_oracles import fd_check
from parc.action_space import PAPER_BINS, discretize
from parc.dqn import (
    DqnAgent, DqnConfig, ReplayBuffer, Transitions, dqn_update, epsilon_greedy, init_q, q_loss,
    td_targets, train_dqn,
)
from parc.envs import make_env
from parc.envs.toy import TwoStateChain
from parc.numerics import MlpParams, Rng, mlp_forward

# Bellman fixed point of the two-state chain with gamma 0.9, solved by hand:
# Q(1,0) = 2, Q(0,1) = 1, Q(0,0) = 0.9 * 2, Q(1,1) = 0.9 * Q(0,0).
CHAIN_Q = np.array([[1.8, 1.0], [2.0, 1.62]])


def random_batch(rng: Rng, n: int, obs_dim: int, n_actions: int) -> Transitions:
    return Transitions(
        rng.normal(n * obs_dim).reshape(n, obs_dim),
        np.array([rng.integers(n_actions) for _ in range(n)]),
        rng.normal(n),
        rng.normal(n * obs_dim).reshape(n, obs_dim),
        rng.uniform(n) < 0.3,
    )


def test_td_target_examples():
    q = MlpParams([np.zeros((2, 1))], [np.array([2.0, -1.0])])  # max Q = 2 everywhere
    batch = Transitions(np.zeros((2, 1)), np.zeros(2, int), np.array([3.0, 1.0]), np.zeros((2, 1)),
                        np.array([True, False]))
    np.testing.assert_allclose(td_targets(batch, q, 0.9), [3.0, 2.8])


def test_td_targets_match_loop():
    rng = Rng(0)
    q = init_q(4, 5, rng, (8, 8))
    batch = random_batch(rng, 32, 4, 5)
    y = td_targets(batch, q, 0.95)
    for i in range(32):
        nxt = mlp_forward(q, batch.next_states[i])[0]
        ref = batch.rewards[i] + (0.0 if batch.terminal[i] else 0.95 * max(nxt))
        assert abs(y[i] - ref) <= 1e-12


def test_terminal_targets_ignore_target_net():
    rng = Rng(1)
    batch = random_batch(rng, 16, 3, 4)
    batch.terminal[:] = True
    a = td_targets(batch, init_q(3, 4, Rng(2), (8,)), 0.9)
    b = td_targets(batch, init_q(3, 4, Rng(3), (8,)), 0.9)
    assert np.array_equal(a, b) and np.array_equal(a, batch.rewards)


@pytest.mark.parametrize("seed", range(3))
def test_q_loss_gradcheck(seed):
    rng = Rng(seed)
    q = init_q(4, 6, rng, (10, 8))
    batch = random_batch(rng, 16, 4, 6)
    y = rng.normal(16)
    _, g = q_loss(q, batch, y)
    n_bad, err = fd_check(lambda: q_loss(q, batch, y)[0], [q], [g])
    assert n_bad == 0, err


def test_q_equal_targets_zero_gradient():
    rng = Rng(0)
    q = init_q(3, 4, rng, (8,))
    batch = random_batch(rng, 8, 3, 4)
    qs = mlp_forward(q, batch.states)[0]
    loss, g = q_loss(q, batch, qs[np.arange(8), batch.actions])
    assert loss == 0.0 and not g.flat().any()


def test_replay_fifo_and_capacity():
    buf = ReplayBuffer(5, 1)
    for i in range(8):
        buf.push([i], i, float(i), [i + 1], False)
    assert len(buf) == 5
    assert sorted(buf.a.tolist()) == [3, 4, 5, 6, 7]


def test_replay_sample_without_replacement():
    buf = ReplayBuffer(100, 1)
    for i in range(40):
        buf.push([i], i, 0.0, [0], False)
    b = buf.sample(32, Rng(0))
    assert len(set(b.actions.tolist())) == 32
    with pytest.raises(ValueError):
        ReplayBuffer(10, 1).sample(1, Rng(0))


def test_update_skips_when_underfilled():
    cfg = DqnConfig(hidden=(8,))
    agent = DqnAgent.create(2, 2, cfg, Rng(0))
    buf = ReplayBuffer(100, 2)
    buf.push([0, 0], 0, 0.0, [0, 0], True)
    assert dqn_update(agent, buf, cfg, Rng(0)) is None and agent.updates == 0


def test_target_sync_period():
    cfg = DqnConfig(hidden=(8,), sync_every=3, batch_size=4, buffer_size=50)
    agent = DqnAgent.create(2, 2, cfg, Rng(0))
    buf = ReplayBuffer(50, 2)
    rng = Rng(1)
    for _ in range(10):
        buf.push(rng.normal(2), rng.integers(2), 1.0, rng.normal(2), False)
    initial = agent.target.flat()
    for i in range(1, 7):
        dqn_update(agent, buf, cfg, rng)
        synced = np.array_equal(agent.target.flat(), agent.q.flat())
        assert synced == (i % 3 == 0)
    assert not np.array_equal(initial, agent.target.flat())


def test_epsilon_schedule():
    cfg = DqnConfig()
    assert cfg.epsilon(0) == 1.0 and cfg.epsilon(50_000) == pytest.approx(0.05)
    assert cfg.epsilon(25_000) == pytest.approx(0.525) and cfg.epsilon(10**6) == pytest.approx(0.05)


def test_full_exploration_uniform():
    q = init_q(2, 16, Rng(0), (8,))
    rng = Rng(1)
    n = 32_000
    counts = np.bincount([epsilon_greedy(q, np.zeros(2), 1.0, rng) for _ in range(n)], minlength=16)
    p = 1 / 16
    assert np.all(np.abs(counts - n * p) <= 5 * np.sqrt(n * p * (1 - p)))


def test_two_state_chain_fixed_point():
    cfg = DqnConfig(hidden=(32, 32), gamma=0.9, eps_start=1.0, eps_end=1.0, lr=1e-3, sync_every=100,
                    learning_starts=200, max_env_steps=15_000, max_iterations=10**6, buffer_size=2000)
    res = train_dqn("two_state", {}, cfg, env=TwoStateChain())
    q = mlp_forward(res.agent.q, np.eye(2))[0]
    np.testing.assert_allclose(q, CHAIN_Q, atol=1e-2)


def test_train_dqn_rows_and_determinism():
    cfg = DqnConfig(hidden=(16, 16), max_iterations=5, learning_starts=64, seed=2)
    a = train_dqn("moving", None, cfg)
    b = train_dqn("moving", None, cfg)
    assert a.stats == b.stats and len(a.stats) == 5
    assert [s.env_steps for s in a.stats] == [64 * (i + 1) for i in range(5)]
    assert all(s.loss_d == 0.0 and s.loss_c == 0.0 for s in a.stats)
    assert len(a.atomic) == 23


def test_atomic_actions_used_verbatim():
    schema = make_env("chase_attack").schema
    acts = discretize(schema, PAPER_BINS["chase_attack"])
    assert len(acts) == 30 and {a.a for a in acts} == {0, 1}
