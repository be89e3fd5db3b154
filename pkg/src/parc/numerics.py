"""Dense float64 numerics: MLPs with manual backprop, distributions, Adam, RNG.

Everything here is a pure function of its inputs. Batched inputs are 2-D
arrays with one row per sample; a 1-D input is treated as a single sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)
GAUSS_ENTROPY_CONST = 0.5 * math.log(2.0 * math.pi * math.e)
LOGSTD_MIN = -5.0
LOGSTD_MAX = 2.0


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


# --------------------------------------------------------------------------- rng


class Rng:
    """Seedable PCG64 stream (2**128 period) with a rejection-free normal sampler.

    ``normal`` uses the cosine branch of Box-Muller on consecutive uniform
    pairs, so ``normal(3)`` and ``normal(1)`` followed by ``normal(2)`` yield
    the same values.
    """

    def __init__(self, seed: int = 0, stream: int = 0):
        self._bitgen = np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)]))
        self._gen = np.random.Generator(self._bitgen)

    def uniform(self, size: int | None = None):
        return self._gen.random(size)

    def normal(self, n: int) -> np.ndarray:
        u = self._gen.random(2 * n)
        return np.sqrt(-2.0 * np.log1p(-u[0::2])) * np.cos(2.0 * np.pi * u[1::2])

    def integers(self, high: int) -> int:
        return int(self._gen.integers(high))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int) -> np.ndarray:
        """``size`` distinct indices from ``range(n)``."""
        return self._gen.choice(n, size=size, replace=False)

    def to_bytes(self) -> bytes:
        st = self._bitgen.state
        parts = [
            st["state"]["state"].to_bytes(16, "little"),
            st["state"]["inc"].to_bytes(16, "little"),
            int(st["has_uint32"]).to_bytes(8, "little"),
            int(st["uinteger"]).to_bytes(8, "little"),
        ]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Rng":
        if len(blob) != 48:
            raise DomainError(f"rng state must be 48 bytes, got {len(blob)}")
        rng = cls(0)
        rng._bitgen.state = {
            "bit_generator": "PCG64",
            "state": {
                "state": int.from_bytes(blob[0:16], "little"),
                "inc": int.from_bytes(blob[16:32], "little"),
            },
            "has_uint32": int.from_bytes(blob[32:40], "little"),
            "uinteger": int.from_bytes(blob[40:48], "little"),
        }
        return rng


# --------------------------------------------------------------------------- mlp

_ACTIVATIONS = ("tanh", "relu")


@dataclass
class MlpParams:
    """Fully connected net; ``weights[i]`` is ``[out x in]``.

    Hidden layers use ``activation``; the output layer is linear unless
    ``activate_output`` is set (used for the shared state encoder, whose
    output feeds further hidden layers).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"
    activate_output: bool = False

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {i}: weight {w.shape} incompatible with bias {b.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(
                    f"layer {i}: in-dim {w.shape[1]} != layer {i - 1} out-dim "
                    f"{self.weights[i - 1].shape[0]}"
                )

    @classmethod
    def init(
        cls,
        sizes: Sequence[int],
        rng: Rng,
        activation: str = "tanh",
        activate_output: bool = False,
        out_scale: float = 1.0,
    ) -> "MlpParams":
        """Scaled-normal init (std 1/sqrt(fan_in)); output layer scaled by ``out_scale``."""
        weights, biases = [], []
        n = len(sizes) - 1
        for i in range(n):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            w = rng.normal(fan_out * fan_in).reshape(fan_out, fan_in) / math.sqrt(fan_in)
            if i == n - 1:
                w *= out_scale
            weights.append(w)
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, activation, activate_output)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def sizes(self) -> list[int]:
        return [self.in_dim] + [w.shape[0] for w in self.weights]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
            self.activate_output,
        )

    def zeros_like(self) -> "MlpParams":
        return MlpParams(
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
            self.activation,
            self.activate_output,
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for a in self.arrays():
            a[...] = vec[pos:pos + a.size].reshape(a.shape)
            pos += a.size
        if pos != vec.size:
            raise ShapeError(f"flat vector has {vec.size} entries, net has {pos}")


@dataclass
class MlpCache:
    inputs: list[np.ndarray]   # input to each layer
    preacts: list[np.ndarray]  # affine output of each layer
    batched: bool


def _act(name: str, z: np.ndarray) -> np.ndarray:
    return np.tanh(z) if name == "tanh" else np.maximum(z, 0.0)


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    return 1.0 - a * a if name == "tanh" else (z > 0.0).astype(z.dtype)


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
    batched = x.ndim == 2
    h = x if batched else x[None, :]
    inputs, preacts = [], []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        if h.shape[1] != w.shape[1]:
            raise ShapeError(f"layer {i}: expected input dim {w.shape[1]}, got {h.shape[1]}")
        inputs.append(h)
        z = h @ w.T + b
        preacts.append(z)
        h = _act(params.activation, z) if (i < last or params.activate_output) else z
    return (h if batched else h[0]), MlpCache(inputs, preacts, batched)


def mlp_backward(
    params: MlpParams, cache: MlpCache, output_grad: np.ndarray
) -> tuple[MlpParams, np.ndarray]:
    """Reverse-mode gradients of ``sum(output * output_grad)``.

    Returns gradients shaped like ``params`` and the gradient w.r.t. the input.
    """
    n = len(params.weights)
    if len(cache.inputs) != n:
        raise ShapeError(f"cache has {len(cache.inputs)} layers, params have {n}")
    for i, w in enumerate(params.weights):
        if cache.inputs[i].shape[1] != w.shape[1] or cache.preacts[i].shape[1] != w.shape[0]:
            raise ShapeError(f"layer {i}: stale cache for weight shape {w.shape}")
    g = output_grad if cache.batched else output_grad[None, :]
    if g.shape != cache.preacts[-1].shape:
        raise ShapeError(f"output grad shape {g.shape} != output shape {cache.preacts[-1].shape}")
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for i in range(n - 1, -1, -1):
        z = cache.preacts[i]
        if i < n - 1 or params.activate_output:
            a = cache.inputs[i + 1] if i < n - 1 else _act(params.activation, z)
            g = g * _act_grad(params.activation, z, a)
        gw[i] = g.T @ cache.inputs[i]
        gb[i] = g.sum(axis=0)
        g = g @ params.weights[i]
    grads = MlpParams(gw, gb, params.activation, params.activate_output)
    return grads, (g if cache.batched else g[0])


def finite_diff_grad(f: Callable[[np.ndarray], float], p: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` at flat vector ``p``."""
    if h <= 0:
        raise DomainError("step must be positive")
    p = np.array(p, dtype=float)
    out = np.empty_like(p)
    for i in range(p.size):
        old = p.flat[i]
        p.flat[i] = old + h
        fp = f(p)
        p.flat[i] = old - h
        fm = f(p)
        p.flat[i] = old
        out.flat[i] = (fp - fm) / (2.0 * h)
    return out


# --------------------------------------------------------------------------- adam


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """Bias-corrected Adam; ``params`` and the state buffers are updated in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and Adam state differ in length")
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0) or lr <= 0:
        raise DomainError("need 0 <= beta < 1 and lr > 0")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch: param {p.shape}, grad {g.shape}, state {m.shape}")
        tmp = np.empty_like(p)
        m *= beta1
        np.multiply(g, 1.0 - beta1, out=tmp)
        m += tmp
        v *= beta2
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - beta2
        v += tmp
        # p -= lr * (m / c1) / (sqrt(v / c2) + eps)
        np.sqrt(v, out=tmp)
        tmp *= 1.0 / math.sqrt(c2)
        tmp += eps
        np.divide(m, tmp, out=tmp)
        tmp *= lr / c1
        p -= tmp
    return state


def clip_global_norm(grads: Sequence[np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads:
            g *= scale
    return norm


# --------------------------------------------------------------------------- distributions


def log_softmax(logits: np.ndarray) -> np.ndarray:
    if logits.shape[-1] == 0:
        raise DomainError("softmax of an empty vector")
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    if logits.shape[-1] == 0:
        raise DomainError("softmax of an empty vector")
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def categorical_sample(probs: np.ndarray, rng: Rng) -> int:
    u = rng.uniform()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, len(probs) - 1)


def categorical_logprob(logits: np.ndarray, index) -> np.ndarray | float:
    lp = log_softmax(logits)
    k = lp.shape[-1]
    if np.any(np.asarray(index) < 0) or np.any(np.asarray(index) >= k):
        raise DomainError(f"index {index} out of range for {k} categories")
    if lp.ndim == 1:
        return float(lp[index])
    return lp[np.arange(lp.shape[0]), index]


def categorical_entropy(logits: np.ndarray) -> np.ndarray | float:
    lp = log_softmax(logits)
    h = -(np.exp(lp) * lp).sum(axis=-1)
    return float(h) if lp.ndim == 1 else h


def clamp_logstd(logstd: np.ndarray) -> np.ndarray:
    return np.clip(logstd, LOGSTD_MIN, LOGSTD_MAX)


def gaussian_sample(mean: np.ndarray, logstd: np.ndarray, rng: Rng) -> np.ndarray:
    return mean + np.exp(clamp_logstd(logstd)) * rng.normal(len(mean))


def gaussian_logprob(mean: np.ndarray, logstd: np.ndarray, x: np.ndarray) -> float:
    ls = clamp_logstd(np.asarray(logstd, dtype=float))
    z = (np.asarray(x) - mean) * np.exp(-ls)
    return float(np.sum(-0.5 * z * z - ls - 0.5 * LOG_2PI))


def gaussian_entropy(logstd: np.ndarray) -> float:
    return float(np.sum(clamp_logstd(np.asarray(logstd, dtype=float)) + GAUSS_ENTROPY_CONST))
