"""Parameterized and hierarchical action spaces.

A parameterized action space is a finite set of discrete actions, each with
its own box of real parameters (possibly empty). ``ActionTree`` generalizes
that to deeper discrete hierarchies; a parameterized space is the depth-2
tree whose root is discrete and whose leaves are continuous.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .numerics import DomainError, ShapeError


@dataclass(frozen=True)
class ParamSpec:
    lo: float
    hi: float
    name: str = ""

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"parameter bounds need lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class ActionSpec:
    name: str
    params: tuple[ParamSpec, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class ActionSchema:
    actions: tuple[ActionSpec, ...]

    def __post_init__(self):
        if not self.actions:
            raise DomainError("schema needs at least one discrete action")

    @property
    def k(self) -> int:
        return len(self.actions)

    @cached_property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.dim for a in self.actions)

    @cached_property
    def total_dim(self) -> int:
        return sum(self.dims)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        """Start of each action's block in the concatenated parameter vector."""
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.dims)[:-1]]))

    @property
    def lows(self) -> np.ndarray:
        return np.array([p.lo for a in self.actions for p in a.params], dtype=float)

    @property
    def highs(self) -> np.ndarray:
        return np.array([p.hi for a in self.actions for p in a.params], dtype=float)

    def index(self, name: str) -> int:
        for i, a in enumerate(self.actions):
            if a.name == name:
                return i
        raise KeyError(name)

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        offs = self.offsets
        return [np.asarray(flat[o:o + d]) for o, d in zip(offs, self.dims)]

    @cached_property
    def _bounds(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [
            (np.array([p.lo for p in s.params], dtype=float), np.array([p.hi for p in s.params], dtype=float))
            for s in self.actions
        ]

    def clamp(self, a: int, x: np.ndarray) -> np.ndarray:
        lo, hi = self._bounds[a]
        return np.clip(np.asarray(x, dtype=float), lo, hi)

    # serialization -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "actions": [
                {
                    "name": a.name,
                    "params": [
                        {"lo": p.lo, "hi": p.hi, **({"name": p.name} if p.name else {})}
                        for p in a.params
                    ],
                }
                for a in self.actions
            ]
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ActionSchema":
        try:
            return cls(tuple(
                ActionSpec(
                    a["name"],
                    tuple(ParamSpec(float(p["lo"]), float(p["hi"]), p.get("name", ""))
                          for p in a.get("params", [])),
                )
                for a in doc["actions"]
            ))
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed schema document: {exc}") from exc

    def hash(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def make_schema(*actions: tuple) -> ActionSchema:
    """``make_schema(("MOVE", [("direction", -pi, pi)]), ("CATCH", []))``."""
    return ActionSchema(tuple(
        ActionSpec(name, tuple(ParamSpec(lo, hi, pname) for pname, lo, hi in params))
        for name, params in actions
    ))


@dataclass
class HybridAction:
    """Discrete choice plus the parameters the continuous actor emitted for every action.

    ``full_params`` holds the raw (unclamped) per-action parameter vectors;
    ``x_a`` is the chosen action's entry. Clamping to bounds happens only when
    the action is handed to an environment.
    """

    a: int
    full_params: list[np.ndarray]

    @property
    def x_a(self) -> np.ndarray:
        return self.full_params[self.a]

    @classmethod
    def single(cls, schema: ActionSchema, a: int, x: Sequence[float] = ()) -> "HybridAction":
        """Action whose non-selected parameters are filled with bound midpoints."""
        full = [
            np.array([(p.lo + p.hi) / 2.0 for p in act.params], dtype=float)
            for act in schema.actions
        ]
        if 0 <= a < schema.k:
            full[a] = np.asarray(x, dtype=float)
        return cls(a, full)


def validate(schema: ActionSchema, action: HybridAction) -> list[str]:
    """Violations of ``schema`` by ``action``; empty list means ok."""
    out: list[str] = []
    if not 0 <= action.a < schema.k:
        out.append(f"index {action.a} out of range [0, {schema.k})")
        return out
    if len(action.full_params) != schema.k:
        out.append(f"full_params has {len(action.full_params)} entries, expected {schema.k}")
    act = schema.actions[action.a]
    x = np.asarray(action.x_a, dtype=float)
    if x.shape != (act.dim,):
        out.append(f"{act.name}: parameter length {x.size}, expected {act.dim}")
        return out
    for i, (v, p) in enumerate(zip(x, act.params)):
        label = p.name or f"dim {i}"
        if not np.isfinite(v):
            out.append(f"{act.name}.{label}: non-finite value {v}")
        elif v < p.lo:
            out.append(f"{act.name}.{label} (dim {i}): {v} below lo {p.lo}")
        elif v > p.hi:
            out.append(f"{act.name}.{label} (dim {i}): {v} above hi {p.hi}")
    return out


def bin_centers(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 1:
        raise DomainError("bin count must be >= 1")
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def discretize(schema: ActionSchema, bins: dict[str, Sequence[int]]) -> list[HybridAction]:
    """Cartesian product of per-dimension bin centers, action by action.

    ``bins`` maps action name to one count per parameter dimension; actions
    without parameters may be omitted.
    """
    out: list[HybridAction] = []
    for a, act in enumerate(schema.actions):
        counts = list(bins.get(act.name, ()))
        if act.dim and len(counts) != act.dim:
            raise DomainError(f"{act.name}: need {act.dim} bin counts, got {len(counts)}")
        if any(c < 1 for c in counts):
            raise DomainError(f"{act.name}: bin counts must be >= 1, got {counts}")
        axes = [bin_centers(p.lo, p.hi, c) for p, c in zip(act.params, counts)]
        for combo in itertools.product(*axes):
            out.append(HybridAction.single(schema, a, combo))
    return out


def discretized_count(schema: ActionSchema, bins: dict[str, Sequence[int]]) -> int:
    return sum(math.prod(bins.get(s.name, ())) for s in schema.actions)


# Per-action bin splits giving 16 / 23 / 30 / 104 atomic actions.
PAPER_BINS: dict[str, dict[str, list[int]]] = {
    "catching_point": {"MOVE": [15]},
    "moving": {"ACCEL": [10], "TURN": [12]},
    "chase_attack": {"RUSH": [15], "ATTACK": [15]},
    "football": {"DASH": [6, 8], "TURN": [8], "KICK": [6, 8]},
}


# --------------------------------------------------------------------------- trees


@dataclass(frozen=True)
class ContinuousLeaf:
    name: str
    params: tuple[ParamSpec, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class DiscreteNode:
    name: str
    children: tuple["TreeNode", ...]


TreeNode = Union[DiscreteNode, ContinuousLeaf]


@dataclass(frozen=True)
class ActionTree:
    """Rooted action tree. Internal nodes select a child; leaves carry parameters.

    A terminal discrete selector is a ``DiscreteNode`` whose children are
    parameter-free leaves.
    """

    root: TreeNode

    def __post_init__(self):
        _check_node(self.root)

    @property
    def depth(self) -> int:
        return _depth(self.root)

    def nodes(self) -> list[tuple[tuple[int, ...], TreeNode]]:
        """Pre-order (path, node) pairs; the path is the branch indices from the root."""
        out: list[tuple[tuple[int, ...], TreeNode]] = []

        def walk(node: TreeNode, path: tuple[int, ...]):
            out.append((path, node))
            if isinstance(node, DiscreteNode):
                for i, c in enumerate(node.children):
                    walk(c, path + (i,))

        walk(self.root, ())
        return out

    def leaves(self) -> list[tuple[tuple[int, ...], ContinuousLeaf]]:
        return [(p, n) for p, n in self.nodes() if isinstance(n, ContinuousLeaf)]


def _check_node(node: TreeNode) -> None:
    if isinstance(node, ContinuousLeaf):
        return
    if not isinstance(node, DiscreteNode):
        raise ShapeError(f"unknown tree node {node!r}")
    if not node.children:
        raise ShapeError(f"discrete node {node.name!r} has no branches")
    for c in node.children:
        _check_node(c)


def _depth(node: TreeNode) -> int:
    if isinstance(node, ContinuousLeaf):
        return 1
    return 1 + max(_depth(c) for c in node.children)


def tree_from_schema(schema: ActionSchema) -> ActionTree:
    return ActionTree(DiscreteNode(
        "root", tuple(ContinuousLeaf(a.name, a.params) for a in schema.actions)
    ))


def schema_from_tree(tree: ActionTree) -> ActionSchema:
    root = tree.root
    if tree.depth != 2 or not isinstance(root, DiscreteNode):
        raise ShapeError(f"only depth-2 trees map to a parameterized schema (depth {tree.depth})")
    return ActionSchema(tuple(ActionSpec(c.name, c.params) for c in root.children))
