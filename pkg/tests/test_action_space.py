import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parc.action_space import (
    PAPER_BINS, ActionSchema, ActionTree, ContinuousLeaf, DiscreteNode, HybridAction, ParamSpec,
    bin_centers, discretize, discretized_count, make_schema, schema_from_tree, tree_from_schema,
    validate,
)
from parc.envs import make_env
from parc.numerics import DomainError, ShapeError


@st.composite
def schemas(draw, max_k=5, max_dim=3):
    k = draw(st.integers(1, max_k))
    actions = []
    for i in range(k):
        m = draw(st.integers(0, max_dim))
        params = []
        for _ in range(m):
            lo = draw(st.floats(-10, 10))
            width = draw(st.floats(0.01, 10))
            params.append((f"p{len(params)}", lo, lo + width))
        actions.append((f"A{i}", params))
    return make_schema(*actions)


def three_actions():
    return make_schema(("A", [("x", 0, 1)]), ("B", [("u", -1, 1), ("v", 0, 2)]), ("C", []))


# --- schema ----------------------------------------------------------------------

def test_schema_basics():
    s = three_actions()
    assert s.k == 3 and s.dims == (1, 2, 0) and s.total_dim == 3
    assert s.offsets == (0, 1, 3)
    assert s.index("B") == 1
    parts = s.split(np.array([0.5, 0.1, 0.2]))
    assert [p.tolist() for p in parts] == [[0.5], [0.1, 0.2], []]


def test_bounds_must_be_ordered():
    with pytest.raises(ValueError):
        ParamSpec(1.0, 1.0)


def test_clamp():
    s = three_actions()
    assert s.clamp(1, np.array([5.0, -3.0])).tolist() == [1.0, 0.0]


@settings(max_examples=100, deadline=None)
@given(schemas())
def test_json_roundtrip(schema):
    back = ActionSchema.from_json(schema.to_json())
    assert back == schema
    assert back.hash() == schema.hash()


def test_hash_sensitive_to_bounds():
    a = make_schema(("A", [("x", 0, 1)]))
    b = make_schema(("A", [("x", 0, 2)]))
    assert a.hash() != b.hash()


# --- validate --------------------------------------------------------------------

def test_validate_ok():
    s = three_actions()
    assert validate(s, HybridAction.single(s, 1, [0.0, 1.0])) == []


def test_validate_index():
    s = three_actions()
    v = validate(s, HybridAction(5, [np.zeros(1), np.zeros(2), np.zeros(0)]))
    assert len(v) == 1 and "index" in v[0]


def test_validate_bounds_names_dimension():
    s = three_actions()
    v = validate(s, HybridAction.single(s, 1, [0.0, 2.5]))
    assert len(v) == 1 and "above hi" in v[0] and "v" in v[0] and "dim 1" in v[0]


def test_validate_length():
    s = three_actions()
    v = validate(s, HybridAction.single(s, 0, [0.1, 0.2]))
    assert v and "length" in v[0]


# --- discretize ------------------------------------------------------------------

def test_bin_centers():
    np.testing.assert_allclose(bin_centers(0, 1, 4), [0.125, 0.375, 0.625, 0.875])
    with pytest.raises(DomainError):
        bin_centers(0, 1, 0)


@pytest.mark.parametrize("env,count", [("catching_point", 16), ("moving", 23), ("chase_attack", 30), ("football", 104)])
def test_paper_bin_totals(env, count):
    schema = make_env(env).schema
    acts = discretize(schema, PAPER_BINS[env])
    assert len(acts) == count == discretized_count(schema, PAPER_BINS[env])
    assert all(validate(schema, a) == [] for a in acts)


def test_football_split():
    acts = discretize(make_env("football").schema, PAPER_BINS["football"])
    counts = {a: sum(1 for x in acts if x.a == a) for a in range(3)}
    assert counts == {0: 48, 1: 8, 2: 48}


def test_unparameterized_single():
    assert len(discretize(make_schema(("NOOP", [])), {})) == 1


def test_zero_bins_rejected():
    with pytest.raises(DomainError):
        discretize(three_actions(), {"A": [0], "B": [1, 1]})


@settings(max_examples=100, deadline=None)
@given(schemas(max_dim=2), st.data())
def test_discretize_count_matches_enumeration(schema, data):
    bins = {s.name: [data.draw(st.integers(1, 4)) for _ in s.params] for s in schema.actions}
    acts = discretize(schema, bins)
    expected = sum(len(list(itertools.product(*[range(b) for b in bins[s.name]]))) for s in schema.actions)
    assert len(acts) == expected == sum(math.prod(bins[s.name]) for s in schema.actions)
    assert all(validate(schema, a) == [] for a in acts)


# --- trees -----------------------------------------------------------------------

def test_moving_tree():
    schema = make_env("moving").schema
    tree = tree_from_schema(schema)
    assert tree.depth == 2
    assert len(tree.root.children) == 3
    assert [leaf.dim for _, leaf in tree.leaves()] == [1, 1, 0]
    assert schema_from_tree(tree) == schema


def test_catching_point_tree():
    tree = tree_from_schema(make_env("catching_point").schema)
    assert [leaf.dim for _, leaf in tree.leaves()] == [1, 0]


def test_depth3_rejected():
    inner = DiscreteNode("inner", (ContinuousLeaf("a", (ParamSpec(0, 1),)), ContinuousLeaf("b")))
    tree = ActionTree(DiscreteNode("root", (inner, ContinuousLeaf("c"))))
    assert tree.depth == 3
    with pytest.raises(ShapeError):
        schema_from_tree(tree)


def test_empty_node_rejected():
    with pytest.raises(ShapeError):
        ActionTree(DiscreteNode("root", ()))


def test_preorder_paths():
    inner = DiscreteNode("inner", (ContinuousLeaf("a"), ContinuousLeaf("b")))
    tree = ActionTree(DiscreteNode("root", (inner, ContinuousLeaf("c"))))
    assert [p for p, _ in tree.nodes()] == [(), (0,), (0, 0), (0, 1), (1,)]


@settings(max_examples=100, deadline=None)
@given(schemas())
def test_tree_roundtrips(schema):
    tree = tree_from_schema(schema)
    assert schema_from_tree(tree) == schema
    assert tree_from_schema(schema_from_tree(tree)) == tree
