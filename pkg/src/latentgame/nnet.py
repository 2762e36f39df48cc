"""Dense feedforward ReLU networks with exact reverse-mode gradients.

Everything is float64 and pure: ``forward`` and ``backward`` never mutate
their arguments. Inputs may be a single vector ``(d_in,)`` or a batch
``(n, d_in)``; for a batch, ``backward`` returns the gradient of
``sum_i upstream[i] . output[i]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HEADS = ("softmax", "linear", "clamp01")
ACTIVATIONS = ("relu",)


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Architecture:
    layer_widths: tuple[int, ...]
    hidden_activation: str = "relu"
    output_head: str = "softmax"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ShapeError(f"need at least input and output widths, got {widths}")
        if any(w < 1 for w in widths):
            raise ShapeError(f"all widths must be >= 1, got {widths}")
        if self.hidden_activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.hidden_activation!r}")
        if self.output_head not in HEADS:
            raise ShapeError(f"unknown output head {self.output_head!r}")

    @property
    def d_in(self) -> int:
        return self.layer_widths[0]

    @property
    def d_out(self) -> int:
        return self.layer_widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1

    @property
    def n_params(self) -> int:
        w = self.layer_widths
        return sum(w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1))

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "hidden_activation": self.hidden_activation,
            "output_head": self.output_head,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(tuple(d["layer_widths"]), d.get("hidden_activation", "relu"),
                   d.get("output_head", "softmax"))


def default_architecture(k: int = 3, d_in: int = 16, hidden: int = 16, depth: int = 4) -> Architecture:
    """ReLU net with ``depth`` hidden layers of ``hidden`` units and a softmax-``k`` head."""
    return Architecture((d_in,) + (hidden,) * depth + (k,), "relu", "softmax")


@dataclass
class NetParams:
    arch: Architecture
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bound: float | None = field(default=None, compare=False)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        widths = self.arch.layer_widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ShapeError("number of layers does not match the architecture")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[i + 1], widths[i]):
                raise ShapeError(f"layer {i}: weight shape {w.shape}, expected {(widths[i + 1], widths[i])}")
            if b.shape != (widths[i + 1],):
                raise ShapeError(f"layer {i}: bias shape {b.shape}, expected {(widths[i + 1],)}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")
        if self.bound is not None and self.max_abs() > self.bound:
            raise ValueError(f"parameter magnitude {self.max_abs()} exceeds bound {self.bound}")

    @property
    def n_params(self) -> int:
        return self.arch.n_params

    def max_abs(self) -> float:
        return max(max(float(np.max(np.abs(w))), float(np.max(np.abs(b))))
                   for w, b in zip(self.weights, self.biases))

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def copy(self) -> "NetParams":
        return NetParams(self.arch, [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.bound)

    def with_flat(self, theta: np.ndarray) -> "NetParams":
        """New net with the same architecture and parameters read from ``theta``."""
        ws, bs, i = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(theta[i:i + w.size].reshape(w.shape))
            i += w.size
            bs.append(theta[i:i + b.size].copy())
            i += b.size
        return NetParams(self.arch, ws, bs)

    def equals(self, other: "NetParams") -> bool:
        """Bitwise equality of architecture and every parameter."""
        return (self.arch == other.arch
                and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
                and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases)))


@dataclass
class GradBuffer:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: NetParams) -> "GradBuffer":
        return cls([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(w * w) + np.sum(b * b) for w, b in zip(self.weights, self.biases))))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in zip(self.weights, self.biases))

    def matches(self, net: NetParams) -> bool:
        return (len(self.weights) == len(net.weights)
                and all(g.shape == w.shape for g, w in zip(self.weights, net.weights))
                and all(g.shape == b.shape for g, b in zip(self.biases, net.biases)))


def init(arch: Architecture, seed: int, scale: float = 1.0) -> NetParams:
    """Fan-in scaled uniform weights on ``[-scale/sqrt(fan_in), scale/sqrt(fan_in)]``, zero biases."""
    if not scale >= 0:
        raise ValueError(f"scale must be nonnegative, got {scale}")
    rng = np.random.default_rng(seed)
    widths = arch.layer_widths
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        lim = scale / np.sqrt(fan_in)
        weights.append(rng.uniform(-1.0, 1.0, size=(fan_out, fan_in)) * lim)
        biases.append(np.zeros(fan_out))
    return NetParams(arch, weights, biases)


def centered_sigmoid(x):
    """Logistic sigmoid minus 1/2, written as ``tanh(x/2)/2`` so it is exactly odd."""
    return 0.5 * np.tanh(0.5 * np.asarray(x, dtype=np.float64))


def centered_sigmoid_grad(x):
    t = np.tanh(0.5 * np.asarray(x, dtype=np.float64))
    return 0.25 * (1.0 - t * t)


def softmax(y: np.ndarray) -> np.ndarray:
    z = y - np.max(y, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _as_batch(net: NetParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.arch.d_in:
        raise ShapeError(f"input shape {x.shape} incompatible with d_in={net.arch.d_in}")
    return X, single


def _pre_head(net: NetParams, X: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Hidden activations (input included) and the pre-head output."""
    acts = [X]
    h = X
    last = net.arch.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        if i == last:
            return acts, z
        h = np.maximum(z, 0.0)
        acts.append(h)
    raise AssertionError("unreachable")


def _head(arch: Architecture, y: np.ndarray) -> np.ndarray:
    if arch.output_head == "softmax":
        return softmax(y)
    if arch.output_head == "clamp01":
        return np.clip(y, 0.0, 1.0)
    return y


def forward(net: NetParams, x) -> np.ndarray:
    X, single = _as_batch(net, x)
    _, y = _pre_head(net, X)
    out = _head(net.arch, y)
    return out[0] if single else out


def forward_pre_head(net: NetParams, x) -> np.ndarray:
    """Network output before the head transform."""
    X, single = _as_batch(net, x)
    _, y = _pre_head(net, X)
    return y[0] if single else y


def backward(net: NetParams, x, upstream) -> tuple[GradBuffer, np.ndarray]:
    """Gradient of ``upstream . forward(net, x)`` w.r.t. parameters and input.

    Returns ``(grads, input_grad)``; ``input_grad`` has the shape of ``x``.
    The ReLU and clamp subgradients at their kinks are 0.
    """
    X, single = _as_batch(net, x)
    U = np.asarray(upstream, dtype=np.float64)
    U = U[None, :] if U.ndim == 1 else U
    if U.shape != (X.shape[0], net.arch.d_out):
        raise ShapeError(f"upstream shape {np.shape(upstream)} does not match output ({X.shape[0]}, {net.arch.d_out})")
    acts, y = _pre_head(net, X)
    head = net.arch.output_head
    if head == "softmax":
        s = softmax(y)
        delta = s * (U - np.sum(s * U, axis=1, keepdims=True))
    elif head == "clamp01":
        delta = U * ((y > 0.0) & (y < 1.0))
    else:
        delta = U
    gw = [None] * net.arch.n_layers
    gb = [None] * net.arch.n_layers
    for i in range(net.arch.n_layers - 1, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i]
        if i > 0:
            delta = delta * (acts[i] > 0.0)
    dx = delta[0] if single else delta
    return GradBuffer(gw, gb), dx


def to_json(net: NetParams) -> dict:
    return {
        "arch": net.arch.to_dict(),
        "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in zip(net.weights, net.biases)],
    }


def from_json(doc: dict) -> NetParams:
    arch = Architecture.from_dict(doc["arch"])
    widths = arch.layer_widths
    weights, biases = [], []
    for i, layer in enumerate(doc["layers"]):
        w = np.array(layer["w"], dtype=np.float64).reshape(widths[i + 1], widths[i])
        weights.append(w)
        biases.append(np.array(layer["b"], dtype=np.float64).reshape(widths[i + 1]))
    return NetParams(arch, weights, biases)


def save(net: NetParams, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(to_json(net)))


def load(path) -> NetParams:
    return from_json(json.loads(Path(path).read_text()))
