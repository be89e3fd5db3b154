"""Hybrid actor-critic networks.

A shared state encoder feeds two parallel actor heads: a discrete head that
emits one logit per discrete action, and a continuous head that emits a
Gaussian (mean, log-std) for every parameter of every action. The critic is a
separate network mapping state to a scalar value.

Continuous heads work in normalized units: a head output ``(m, l)`` for a
parameter with bounds ``[lo, hi]`` means a Gaussian with mean
``mid + half * m`` and log-std ``clamp(l) + log(half)``. Samples are not
squashed; they are clamped to bounds only when handed to an environment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .action_space import (
    ActionSchema,
    ActionTree,
    ContinuousLeaf,
    DiscreteNode,
    HybridAction,
    tree_from_schema,
)
from .numerics import (
    GAUSS_ENTROPY_CONST,
    LOG_2PI,
    LOGSTD_MAX,
    LOGSTD_MIN,
    DomainError,
    MlpCache,
    MlpParams,
    Rng,
    ShapeError,
    categorical_sample,
    log_softmax,
    mlp_backward,
    mlp_forward,
    softmax,
)

HIDDEN = (256, 256, 128, 64)
SHARED_LAYERS = 2
HEAD_OUT_SCALE = 0.01

CriticParams = MlpParams


def _param_scaling(schema: ActionSchema) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = schema.lows, schema.highs
    return (lo + hi) / 2.0, (hi - lo) / 2.0


@dataclass
class HybridPolicyParams:
    schema: ActionSchema
    encoder: MlpParams
    discrete_head: MlpParams
    continuous_head: MlpParams

    def __post_init__(self):
        h = self.encoder.out_dim
        if self.discrete_head.in_dim != h or self.continuous_head.in_dim != h:
            raise ShapeError("encoder output dim must match both heads' input dims")
        if self.discrete_head.out_dim != self.schema.k:
            raise ShapeError(f"discrete head emits {self.discrete_head.out_dim} logits, schema has k={self.schema.k}")
        if self.continuous_head.out_dim != 2 * self.schema.total_dim:
            raise ShapeError(
                f"continuous head emits {self.continuous_head.out_dim} values, "
                f"need 2 * {self.schema.total_dim}"
            )
        self.center, self.half = _param_scaling(self.schema)
        self.log_half = np.log(self.half)

    @property
    def obs_dim(self) -> int:
        return self.encoder.in_dim

    def nets(self) -> dict[str, MlpParams]:
        return {"encoder": self.encoder, "discrete_head": self.discrete_head,
                "continuous_head": self.continuous_head}

    def copy(self) -> "HybridPolicyParams":
        return HybridPolicyParams(self.schema, self.encoder.copy(), self.discrete_head.copy(),
                                  self.continuous_head.copy())


def init_policy(
    schema: ActionSchema,
    obs_dim: int,
    rng: Rng,
    hidden: Sequence[int] = HIDDEN,
    shared_layers: int = SHARED_LAYERS,
    logstd_init: float = 0.0,
    activation: str = "tanh",
) -> HybridPolicyParams:
    hidden = list(hidden)
    if not 1 <= shared_layers <= len(hidden):
        raise DomainError("shared_layers must be between 1 and the number of hidden layers")
    enc_sizes = [obs_dim] + hidden[:shared_layers]
    head_sizes = hidden[shared_layers - 1:]
    encoder = MlpParams.init(enc_sizes, rng, activation, activate_output=True)
    dhead = MlpParams.init(head_sizes + [schema.k], rng, activation, out_scale=HEAD_OUT_SCALE)
    M = schema.total_dim
    chead = MlpParams.init(head_sizes + [2 * M], rng, activation, out_scale=HEAD_OUT_SCALE)
    chead.biases[-1][M:] = logstd_init
    return HybridPolicyParams(schema, encoder, dhead, chead)


def init_critic(obs_dim: int, rng: Rng, hidden: Sequence[int] = HIDDEN, activation: str = "tanh") -> MlpParams:
    return MlpParams.init([obs_dim] + list(hidden) + [1], rng, activation)


# --------------------------------------------------------------------------- single-state API


@dataclass
class PolicyOutput:
    """Head outputs for one state, parameters in raw (environment) units.

    ``means``/``logstds`` are flat over all actions' parameters, in schema order.
    """

    logits: np.ndarray
    means: np.ndarray
    logstds: np.ndarray
    value: float = 0.0


def policy_forward(policy: HybridPolicyParams, critic: MlpParams | None, state: np.ndarray) -> PolicyOutput:
    state = np.asarray(state, dtype=float)
    if state.shape != (policy.obs_dim,):
        raise ShapeError(f"state has shape {state.shape}, encoder expects ({policy.obs_dim},)")
    h, _ = mlp_forward(policy.encoder, state)
    logits, _ = mlp_forward(policy.discrete_head, h)
    cont, _ = mlp_forward(policy.continuous_head, h)
    M = policy.schema.total_dim
    means = policy.center + policy.half * cont[:M]
    logstds = np.clip(cont[M:], LOGSTD_MIN, LOGSTD_MAX) + policy.log_half
    value = float(mlp_forward(critic, state)[0][0]) if critic is not None else 0.0
    return PolicyOutput(logits, means, logstds, value)


def _gauss_logp(mean, logstd, x) -> float:
    z = (x - mean) * np.exp(-logstd)
    return float(np.sum(-0.5 * z * z - logstd - 0.5 * LOG_2PI))


def sample_action(output: PolicyOutput, schema: ActionSchema, rng: Rng) -> tuple[HybridAction, float, float]:
    """Draw ``a`` from the softmax, then parameters for every action in schema order."""
    logp = log_softmax(output.logits)
    a = categorical_sample(np.exp(logp), rng)
    M = schema.total_dim
    flat = output.means + np.exp(output.logstds) * rng.normal(M) if M else np.zeros(0)
    full = schema.split(flat)
    lo = schema.offsets[a]
    sl = slice(lo, lo + schema.dims[a])
    logp_c = _gauss_logp(output.means[sl], output.logstds[sl], flat[sl]) if schema.dims[a] else 0.0
    logp_d = float(logp[a]) if schema.k > 1 else 0.0
    return HybridAction(a, full), logp_d, logp_c


@dataclass
class ActionEval:
    logp_d: float
    logp_c: float
    entropy_d: float
    entropy_c: float
    value: float


def evaluate_action(policy: HybridPolicyParams, critic: MlpParams | None, state: np.ndarray,
                    action: HybridAction) -> ActionEval:
    schema = policy.schema
    if not 0 <= action.a < schema.k:
        raise DomainError(f"action index {action.a} out of range [0, {schema.k})")
    if len(action.full_params) != schema.k or any(
        np.asarray(p).shape != (d,) for p, d in zip(action.full_params, schema.dims)
    ):
        raise DomainError("full_params do not match the schema's parameter dims")
    out = policy_forward(policy, critic, state)
    lp = log_softmax(out.logits)
    p = np.exp(lp)
    lo = schema.offsets[action.a]
    sl = slice(lo, lo + schema.dims[action.a])
    x = np.asarray(action.x_a, dtype=float)
    logp_c = _gauss_logp(out.means[sl], out.logstds[sl], x) if schema.dims[action.a] else 0.0
    ent_c = float(np.sum(out.logstds[sl] + GAUSS_ENTROPY_CONST))
    return ActionEval(float(lp[action.a]) if schema.k > 1 else 0.0, logp_c,
                      float(-(p * lp).sum()), ent_c, out.value)


def greedy_action(output: PolicyOutput, schema: ActionSchema) -> HybridAction:
    a = int(np.argmax(output.logits))
    return HybridAction(a, schema.split(output.means))


# --------------------------------------------------------------------------- batched terms


@dataclass
class BatchForward:
    """Batched head outputs plus the caches needed to backpropagate into them."""

    logits: np.ndarray       # (B, k)
    means: np.ndarray        # (B, M) raw units
    logstds: np.ndarray      # (B, M) raw units, clamped
    live: np.ndarray         # (B, M) True where the log-std clamp is inactive
    enc_cache: MlpCache
    d_cache: MlpCache
    c_cache: MlpCache


def forward_batch(policy: HybridPolicyParams, states: np.ndarray) -> BatchForward:
    h, enc_cache = mlp_forward(policy.encoder, states)
    logits, d_cache = mlp_forward(policy.discrete_head, h)
    cont, c_cache = mlp_forward(policy.continuous_head, h)
    M = policy.schema.total_dim
    raw_ls = cont[:, M:]
    live = (raw_ls >= LOGSTD_MIN) & (raw_ls <= LOGSTD_MAX)
    return BatchForward(
        logits,
        policy.center + policy.half * cont[:, :M],
        np.clip(raw_ls, LOGSTD_MIN, LOGSTD_MAX) + policy.log_half,
        live, enc_cache, d_cache, c_cache,
    )


def selection_mask(schema: ActionSchema, actions: np.ndarray) -> np.ndarray:
    """(B, M) mask selecting each sample's chosen-action parameter block."""
    M = schema.total_dim
    owner = np.repeat(np.arange(schema.k), schema.dims)  # action index owning each flat dim
    return (owner[None, :] == np.asarray(actions)[:, None]).astype(float) if M else np.zeros((len(actions), 0))


def discrete_terms(fwd: BatchForward, actions: np.ndarray):
    """Per-sample log-prob and entropy of the discrete policy, with their logit gradients.

    Returns ``(logp, entropy, dlogp_dlogits, dent_dlogits)``.
    """
    lp = log_softmax(fwd.logits)
    p = np.exp(lp)
    B = len(actions)
    logp = lp[np.arange(B), actions]
    ent = -(p * lp).sum(axis=1)
    onehot = np.zeros_like(p)
    onehot[np.arange(B), actions] = 1.0
    return logp, ent, onehot - p, -p * (lp + ent[:, None])


def continuous_terms(fwd: BatchForward, sel: np.ndarray, params: np.ndarray):
    """Per-sample log-prob / entropy of the chosen action's Gaussian.

    Returns ``(logp, entropy, (dlogp_dmean, dlogp_dlogstd), dent_dlogstd)`` with
    gradients w.r.t. the raw means and log-stds; entries outside the chosen
    block are exactly zero.
    """
    inv_std = np.exp(-fwd.logstds)
    z = (params - fwd.means) * inv_std
    logp = (sel * (-0.5 * z * z - fwd.logstds - 0.5 * LOG_2PI)).sum(axis=1)
    ent = (sel * (fwd.logstds + GAUSS_ENTROPY_CONST)).sum(axis=1)
    return logp, ent, (sel * z * inv_std, sel * (z * z - 1.0)), sel.copy()


def backward_discrete(policy: HybridPolicyParams, fwd: BatchForward, dlogits: np.ndarray):
    """Gradients of ``sum(logits * dlogits)`` for the encoder and discrete head."""
    g_head, dh = mlp_backward(policy.discrete_head, fwd.d_cache, dlogits)
    g_enc, _ = mlp_backward(policy.encoder, fwd.enc_cache, dh)
    return g_enc, g_head


def continuous_output_grad(policy: HybridPolicyParams, fwd: BatchForward, dmean: np.ndarray,
                           dlogstd: np.ndarray) -> np.ndarray:
    """Map raw-unit gradients onto the continuous head's normalized outputs."""
    return np.concatenate([dmean * policy.half, dlogstd * fwd.live], axis=1)


def backward_continuous(policy: HybridPolicyParams, fwd: BatchForward, dout: np.ndarray):
    g_head, dh = mlp_backward(policy.continuous_head, fwd.c_cache, dout)
    g_enc, _ = mlp_backward(policy.encoder, fwd.enc_cache, dh)
    return g_enc, g_head


# --------------------------------------------------------------------------- actor sets


@dataclass
class ActorHead:
    """One actor of an ActorSet: rows ``out`` of ``net``'s output.

    Discrete heads read logits; continuous heads read ``dim`` normalized means
    followed (at ``ls_offset``) by ``dim`` normalized log-stds.
    """

    kind: str
    net: MlpParams
    out: np.ndarray
    ls_out: np.ndarray | None = None
    center: np.ndarray | None = None
    half: np.ndarray | None = None


@dataclass
class ActorSet:
    tree: ActionTree
    encoder: MlpParams
    heads: dict[tuple[int, ...], ActorHead]

    def nets(self) -> list[MlpParams]:
        seen: dict[int, MlpParams] = {}
        for h in self.heads.values():
            seen.setdefault(id(h.net), h.net)
        return list(seen.values())


def _leaf_scaling(leaf: ContinuousLeaf):
    lo = np.array([p.lo for p in leaf.params], dtype=float)
    hi = np.array([p.hi for p in leaf.params], dtype=float)
    return (lo + hi) / 2.0, (hi - lo) / 2.0


def build_actor_set(tree: ActionTree, obs_dim: int, rng: Rng, hidden: Sequence[int] = HIDDEN,
                    shared_layers: int = SHARED_LAYERS, activation: str = "tanh") -> ActorSet:
    """Fresh actor set: shared encoder plus one head per discrete node and per parameterized leaf."""
    hidden = list(hidden)
    encoder = MlpParams.init([obs_dim] + hidden[:shared_layers], rng, activation, activate_output=True)
    head_sizes = hidden[shared_layers - 1:]
    heads: dict[tuple[int, ...], ActorHead] = {}
    for path, node in tree.nodes():
        if isinstance(node, DiscreteNode):
            n = len(node.children)
            net = MlpParams.init(head_sizes + [n], rng, activation, out_scale=HEAD_OUT_SCALE)
            heads[path] = ActorHead("discrete", net, np.arange(n))
        elif node.dim:
            d = node.dim
            net = MlpParams.init(head_sizes + [2 * d], rng, activation, out_scale=HEAD_OUT_SCALE)
            c, h = _leaf_scaling(node)
            heads[path] = ActorHead("continuous", net, np.arange(d), np.arange(d, 2 * d), c, h)
    return ActorSet(tree, encoder, heads)


def actor_set_from_policy(policy: HybridPolicyParams) -> ActorSet:
    """View a hybrid policy as the actor set of its depth-2 tree (weights shared, not copied)."""
    schema = policy.schema
    tree = tree_from_schema(schema)
    M = schema.total_dim
    heads = {(): ActorHead("discrete", policy.discrete_head, np.arange(schema.k))}
    for a, (off, d) in enumerate(zip(schema.offsets, schema.dims)):
        if d:
            c, h = _leaf_scaling(tree.root.children[a])
            heads[(a,)] = ActorHead("continuous", policy.continuous_head, np.arange(off, off + d),
                                    np.arange(M + off, M + off + d), c, h)
    return ActorSet(tree, policy.encoder, heads)


@dataclass
class TreeSample:
    path: tuple[int, ...]
    leaf: ContinuousLeaf
    params: np.ndarray
    choices: dict[tuple[int, ...], object] = field(default_factory=dict)
    logps: dict[tuple[int, ...], float] = field(default_factory=dict)


def actor_set_outputs(aset: ActorSet, state: np.ndarray) -> dict[int, np.ndarray]:
    h, _ = mlp_forward(aset.encoder, np.asarray(state, dtype=float))
    return {id(net): mlp_forward(net, h)[0] for net in aset.nets()}


def _node_dist(head: ActorHead, outs: dict[int, np.ndarray]):
    y = outs[id(head.net)]
    if head.kind == "discrete":
        return log_softmax(y[head.out])
    mean = head.center + head.half * y[head.out]
    logstd = np.clip(y[head.ls_out], LOGSTD_MIN, LOGSTD_MAX) + np.log(head.half)
    return mean, logstd


def sample_tree_action(aset: ActorSet, state: np.ndarray, rng: Rng) -> TreeSample:
    """Every actor samples (pre-order); the root-to-leaf path picks which choices execute.

    Log-probabilities are reported separately for each node on the path.
    """
    outs = actor_set_outputs(aset, state)
    choices: dict[tuple[int, ...], object] = {}
    dists = {}
    for path, node in aset.tree.nodes():
        head = aset.heads.get(path)
        if head is None:
            continue
        dist = _node_dist(head, outs)
        dists[path] = dist
        if head.kind == "discrete":
            choices[path] = categorical_sample(np.exp(dist), rng)
        else:
            mean, logstd = dist
            choices[path] = mean + np.exp(logstd) * rng.normal(len(mean))
    node, path, logps = aset.tree.root, (), {}
    while isinstance(node, DiscreteNode):
        i = choices[path]
        logps[path] = float(dists[path][i]) if len(node.children) > 1 else 0.0
        node, path = node.children[i], path + (i,)
    if node.dim:
        mean, logstd = dists[path]
        logps[path] = _gauss_logp(mean, logstd, choices[path])
        x = choices[path]
    else:
        x = np.zeros(0)
    return TreeSample(path, node, x, choices, logps)


def tree_leaf_probabilities(aset: ActorSet, state: np.ndarray) -> dict[tuple[int, ...], float]:
    """Probability of reaching each leaf under the discrete actors."""
    outs = actor_set_outputs(aset, state)
    probs: dict[tuple[int, ...], float] = {}

    def walk(node, path, p):
        if isinstance(node, ContinuousLeaf):
            probs[path] = p
            return
        q = softmax(outs[id(aset.heads[path].net)][aset.heads[path].out])
        for i, c in enumerate(node.children):
            walk(c, path + (i,), p * float(q[i]))

    walk(aset.tree.root, (), 1.0)
    return probs


# --------------------------------------------------------------------------- checkpoints

CHECKPOINT_FORMAT = 1


def _net_to_json(net: MlpParams) -> dict:
    return {
        "sizes": net.sizes,
        "activation": net.activation,
        "activate_output": net.activate_output,
        "params": [float(v) for v in net.flat()],
    }


def _net_from_json(doc: dict) -> MlpParams:
    sizes = doc["sizes"]
    net = MlpParams(
        [np.zeros((sizes[i + 1], sizes[i])) for i in range(len(sizes) - 1)],
        [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)],
        doc["activation"], doc["activate_output"],
    )
    net.set_flat(np.array(doc["params"], dtype=float))
    return net


def checkpoint_doc(schema: ActionSchema, nets: dict[str, MlpParams], meta: dict | None = None) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "schema_hash": schema.hash(),
        "schema": schema.to_json(),
        "networks": {name: _net_to_json(n) for name, n in nets.items()},
        "meta": meta or {},
    }


def save_checkpoint(path: str | Path, schema: ActionSchema, nets: dict[str, MlpParams],
                    meta: dict | None = None) -> None:
    # json writes floats with repr(), the shortest string that round-trips the float64 exactly
    doc = checkpoint_doc(schema, nets, meta)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc))
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> tuple[ActionSchema, dict[str, MlpParams], dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DomainError(f"unsupported checkpoint format {doc.get('format')!r}")
    schema = ActionSchema.from_json(doc["schema"])
    if schema.hash() != doc["schema_hash"]:
        raise DomainError("checkpoint schema hash does not match its embedded schema")
    nets = {name: _net_from_json(d) for name, d in doc["networks"].items()}
    return schema, nets, doc.get("meta", {})


def policy_from_nets(schema: ActionSchema, nets: dict[str, MlpParams]) -> tuple[HybridPolicyParams, MlpParams]:
    return (HybridPolicyParams(schema, nets["encoder"], nets["discrete_head"], nets["continuous_head"]),
            nets["critic"])
