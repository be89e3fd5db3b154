import json
import math

import numpy as np
import pytest

from parc.action_space import (
    ActionTree, ContinuousLeaf, DiscreteNode, HybridAction, ParamSpec, make_schema, tree_from_schema,
)
from parc.envs import ENVS, make_env
from parc.hppo import train_actor_set_bandit
from parc.numerics import DomainError, MlpParams, Rng, ShapeError, mlp_forward, softmax
from parc.policy import (
    CHECKPOINT_FORMAT, actor_set_from_policy, build_actor_set, evaluate_action, greedy_action,
    init_critic, init_policy, load_checkpoint, policy_forward, policy_from_nets, sample_action,
    sample_tree_action, save_checkpoint, tree_leaf_probabilities,
)

SMALL = (16, 16, 8, 8)


def small_policy(schema, obs_dim=5, seed=0, logstd_init=0.0):
    rng = Rng(seed)
    return init_policy(schema, obs_dim, rng, SMALL, logstd_init=logstd_init), init_critic(obs_dim, rng, SMALL)


def zeroed(net: MlpParams) -> MlpParams:
    z = net.zeros_like()
    return z


def test_zero_weights_give_uniform_policy():
    schema = make_env("catching_point").schema
    pol, critic = small_policy(schema, obs_dim=8)
    for name in ("encoder", "discrete_head", "continuous_head"):
        setattr(pol, name, zeroed(getattr(pol, name)))
    out = policy_forward(pol, zeroed(critic), np.ones(8))
    assert out.logits.tolist() == [0.0, 0.0]
    assert out.means.tolist() == [0.0]
    assert out.value == 0.0


def test_masked_state_component_irrelevant():
    schema = make_env("moving").schema
    pol, critic = small_policy(schema, obs_dim=11)
    pol.encoder.weights[0][:, 3] = 0.0
    critic.weights[0][:, 3] = 0.0
    s1 = Rng(1).normal(11)
    s2 = s1.copy()
    s2[3] += 5.0
    o1, o2 = policy_forward(pol, critic, s1), policy_forward(pol, critic, s2)
    assert np.array_equal(o1.logits, o2.logits) and np.array_equal(o1.means, o2.means)
    assert o1.value == o2.value


def test_forward_equals_manual_composition():
    schema = make_env("football").schema
    pol, critic = small_policy(schema, obs_dim=15, seed=3)
    s = Rng(2).normal(15)
    out = policy_forward(pol, critic, s)
    h = mlp_forward(pol.encoder, s)[0]
    logits = mlp_forward(pol.discrete_head, h)[0]
    cont = mlp_forward(pol.continuous_head, h)[0]
    M = schema.total_dim
    np.testing.assert_array_equal(out.logits, logits)
    np.testing.assert_allclose(out.means, pol.center + pol.half * cont[:M], atol=1e-15)
    np.testing.assert_allclose(out.logstds, np.clip(cont[M:], -5, 2) + np.log(pol.half), atol=1e-15)
    assert out.value == mlp_forward(critic, s)[0][0]


def test_logstd_clamped_on_read():
    schema = make_schema(("A", [("x", -1, 1)]))
    pol, _ = small_policy(schema, logstd_init=7.0)
    assert policy_forward(pol, None, np.zeros(5)).logstds[0] == pytest.approx(2.0, abs=0.05)


def test_forward_shape_error():
    pol, critic = small_policy(make_env("moving").schema, obs_dim=11)
    with pytest.raises(ShapeError):
        policy_forward(pol, critic, np.zeros(4))


def test_head_shapes_checked():
    schema = make_env("moving").schema
    pol, _ = small_policy(schema, obs_dim=11)
    other = make_env("catching_point").schema
    with pytest.raises(ShapeError):
        type(pol)(other, pol.encoder, pol.discrete_head, pol.continuous_head)


# --- sampling ----------------------------------------------------------------------

def test_single_action_logp_d_zero():
    schema = make_schema(("ONLY", [("x", 0, 1)]))
    pol, _ = small_policy(schema)
    rng = Rng(0)
    for _ in range(20):
        _, lpd, lpc = sample_action(policy_forward(pol, None, rng.normal(5)), schema, rng)
        assert lpd == 0.0 and lpc != 0.0


def test_unparameterized_choice_logp_c_zero():
    schema = make_env("catching_point").schema
    pol, _ = small_policy(schema, obs_dim=8)
    rng = Rng(1)
    seen = 0
    for _ in range(200):
        act, _, lpc = sample_action(policy_forward(pol, None, np.zeros(8)), schema, rng)
        if act.a == 1:
            assert lpc == 0.0
            seen += 1
    assert seen > 0


def test_sample_frequencies():
    schema = make_env("moving").schema
    pol, _ = small_policy(schema, obs_dim=11)
    pol.discrete_head.biases[-1][:] = [1.0, 0.0, -0.5]
    out = policy_forward(pol, None, np.zeros(11))
    p = softmax(out.logits)
    rng = Rng(4)
    n = 100_000
    counts = np.bincount([sample_action(out, schema, rng)[0].a for _ in range(n)], minlength=3)
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 5 * sigma)


def test_params_sampled_for_every_action_and_unclamped():
    schema = make_env("moving").schema
    pol, _ = small_policy(schema, obs_dim=11, logstd_init=1.5)
    rng = Rng(2)
    out_of_bounds = False
    for _ in range(100):
        act, _, _ = sample_action(policy_forward(pol, None, np.zeros(11)), schema, rng)
        assert [len(p) for p in act.full_params] == [1, 1, 0]
        out_of_bounds |= not (0 <= act.full_params[0][0] <= 1)
    assert out_of_bounds


def test_evaluate_matches_sampling():
    schema = make_env("football").schema
    pol, critic = small_policy(schema, obs_dim=15)
    rng = Rng(5)
    for _ in range(50):
        s = rng.normal(15)
        out = policy_forward(pol, critic, s)
        act, lpd, lpc = sample_action(out, schema, rng)
        ev = evaluate_action(pol, critic, s, act)
        assert abs(ev.logp_d - lpd) <= 1e-12 and abs(ev.logp_c - lpc) <= 1e-12
        assert ev.value == out.value


def test_logp_c_ignores_other_actions_params():
    schema = make_env("football").schema
    pol, critic = small_policy(schema, obs_dim=15)
    s = Rng(0).normal(15)
    act = HybridAction(2, [np.array([0.3, 1.0]), np.array([0.2]), np.array([0.9, -2.0])])
    other = HybridAction(2, [np.array([9.0, -9.0]), np.array([5.0]), np.array([0.9, -2.0])])
    assert evaluate_action(pol, critic, s, act).logp_c == evaluate_action(pol, critic, s, other).logp_c


def test_logp_c_against_density_oracle():
    schema = make_env("football").schema
    pol, critic = small_policy(schema, obs_dim=15)
    rng = Rng(8)
    for _ in range(20):
        s = rng.normal(15)
        act = HybridAction.single(schema, 0, [rng.uniform(), rng.uniform() * 6 - 3])
        out = policy_forward(pol, critic, s)
        dens = 1.0
        for m, ls, x in zip(out.means[:2], out.logstds[:2], act.x_a):
            sd = math.exp(ls)
            dens *= math.exp(-0.5 * ((x - m) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
        assert evaluate_action(pol, critic, s, act).logp_c == pytest.approx(math.log(dens), abs=1e-12)


def test_entropy_c_is_selected_action_only():
    schema = make_env("football").schema
    pol, critic = small_policy(schema, obs_dim=15)
    s = np.zeros(15)
    out = policy_forward(pol, critic, s)
    ev = evaluate_action(pol, critic, s, HybridAction.single(schema, 1, [0.0]))
    assert ev.entropy_c == pytest.approx(out.logstds[2] + 0.5 * math.log(2 * math.pi * math.e))


def test_evaluate_rejects_invalid():
    schema = make_env("moving").schema
    pol, critic = small_policy(schema, obs_dim=11)
    with pytest.raises(DomainError):
        evaluate_action(pol, critic, np.zeros(11), HybridAction(4, [np.zeros(1), np.zeros(1), np.zeros(0)]))
    with pytest.raises(DomainError):
        evaluate_action(pol, critic, np.zeros(11), HybridAction(0, [np.zeros(2), np.zeros(1), np.zeros(0)]))


def test_greedy_action():
    schema = make_env("moving").schema
    pol, _ = small_policy(schema, obs_dim=11)
    pol.discrete_head.biases[-1][:] = [0.0, 3.0, 0.0]
    out = policy_forward(pol, None, np.zeros(11))
    act = greedy_action(out, schema)
    assert act.a == 1 and act.x_a[0] == out.means[1]


# --- actor sets --------------------------------------------------------------------

@pytest.mark.parametrize("name", list(ENVS))
def test_actor_set_matches_hybrid_sampling(name):
    env = make_env(name)
    pol, _ = small_policy(env.schema, obs_dim=env.obs_dim, seed=7)
    aset = actor_set_from_policy(pol)
    r1, r2, states = Rng(3, 1), Rng(3, 1), Rng(9)
    for _ in range(200):
        s = states.normal(env.obs_dim)
        act, lpd, lpc = sample_action(policy_forward(pol, None, s), env.schema, r1)
        ts = sample_tree_action(aset, s, r2)
        assert ts.path == (act.a,)
        assert np.array_equal(ts.params, act.x_a)
        assert ts.logps[()] == lpd
        assert ts.logps.get((act.a,), 0.0) == lpc


def test_uniform_depth3_leaf_probabilities():
    leaf = ContinuousLeaf
    tree = ActionTree(DiscreteNode("root", (
        DiscreteNode("a", (leaf("a0"), leaf("a1"), leaf("a2"))),
        DiscreteNode("b", (leaf("b0"), leaf("b1"))),
    )))
    aset = build_actor_set(tree, 3, Rng(0), SMALL)
    for head in aset.heads.values():
        head.net.weights[-1][:] = 0.0
        head.net.biases[-1][:] = 0.0
    probs = tree_leaf_probabilities(aset, np.zeros(3))
    assert probs[(0, 0)] == pytest.approx(1 / 6) and probs[(1, 1)] == pytest.approx(1 / 4)
    assert sum(probs.values()) == pytest.approx(1.0)


def test_toy_tree_concentrates_on_rewarded_leaf():
    leaf = ContinuousLeaf
    tree = ActionTree(DiscreteNode("root", (
        DiscreteNode("L", (leaf("LL"), leaf("LR"))),
        DiscreteNode("R", (leaf("RL"), leaf("RR"))),
    )))
    aset = build_actor_set(tree, 1, Rng(0), SMALL)
    train_actor_set_bandit(aset, lambda path, x: 1.0 if path == (1, 0) else 0.0, np.ones(1),
                           iterations=60, rng=Rng(0, 1), lr=3e-3)
    assert tree_leaf_probabilities(aset, np.ones(1))[(1, 0)] >= 0.9


def test_tree_sample_logps_per_node():
    tree = ActionTree(DiscreteNode("root", (
        DiscreteNode("x", (ContinuousLeaf("p", (ParamSpec(0, 1),)), ContinuousLeaf("q"))),
        ContinuousLeaf("r"),
    )))
    aset = build_actor_set(tree, 2, Rng(1), SMALL)
    rng = Rng(2)
    for _ in range(50):
        ts = sample_tree_action(aset, np.zeros(2), rng)
        assert set(ts.logps) <= {(), (0,), (0, 0)}
        assert () in ts.logps
        if ts.path == (0, 0):
            assert len(ts.params) == 1 and (0, 0) in ts.logps


# --- checkpoints -------------------------------------------------------------------

def test_checkpoint_roundtrip_exact(tmp_path):
    schema = make_env("football").schema
    pol, critic = small_policy(schema, obs_dim=15, seed=11)
    path = tmp_path / "ck.json"
    save_checkpoint(path, schema, {**pol.nets(), "critic": critic}, {"algo": "hppo"})
    doc = json.loads(path.read_text())
    assert doc["format"] == CHECKPOINT_FORMAT and doc["schema_hash"] == schema.hash()
    schema2, nets, meta = load_checkpoint(path)
    pol2, critic2 = policy_from_nets(schema2, nets)
    assert schema2 == schema and meta == {"algo": "hppo"}
    for a, b in zip(list(pol.nets().values()) + [critic], list(pol2.nets().values()) + [critic2]):
        assert np.array_equal(a.flat(), b.flat())


def test_checkpoint_tampered_schema(tmp_path):
    schema = make_env("moving").schema
    pol, critic = small_policy(schema, obs_dim=11)
    path = tmp_path / "ck.json"
    save_checkpoint(path, schema, {**pol.nets(), "critic": critic})
    doc = json.loads(path.read_text())
    doc["schema"]["actions"][0]["params"][0]["hi"] = 2.0
    path.write_text(json.dumps(doc))
    with pytest.raises(DomainError):
        load_checkpoint(path)


def test_tree_from_env_schema_is_depth2():
    assert tree_from_schema(make_env("chase_attack").schema).depth == 2
