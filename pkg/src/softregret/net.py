"""Small fully-connected networks with hand-written backprop.

A model maps one input row to a scalar.  For the single-model reward
network the input row is ``[x, w_1, ..., w_d]`` with the action as a 0/1
feature in front of the context.  Layer ``l`` computes
``a_l = act(a_{l-1} @ W_l + b_l)`` with ``W_l`` of shape ``(fan_in, fan_out)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import as_rng

__all__ = [
    "MlpSpec",
    "MlpModel",
    "Gradient",
    "OptimizerState",
    "TrainingDivergedError",
    "init",
    "forward",
    "forward_batch",
    "backward",
    "step",
    "action_inputs",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]

CHECKPOINT_VERSION = 1

HIDDEN_ACTIVATIONS = ("relu", "tanh", "identity")
OUTPUT_ACTIVATIONS = ("identity", "logistic")


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or gradient becomes non-finite."""


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple = (64, 64)
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if int(self.input_dim) < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def layer_sizes(self) -> list[int]:
        return [int(self.input_dim), *self.hidden, 1]


@dataclass
class MlpModel:
    spec: MlpSpec
    weights: list
    biases: list

    def copy(self) -> "MlpModel":
        return MlpModel(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self) -> list:
        """Parameters in checkpoint order: W_1, b_1, W_2, b_2, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params())


# Gradients share the parameter layout; a list of arrays in params() order.
Gradient = list


def init(spec: MlpSpec, rng) -> MlpModel:
    """Fan-in scaled uniform weights, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``.

    The variance of each weight is ``1 / (3 * fan_in)``.  Biases start at zero.
    """
    gen = as_rng(rng).generator("init")
    sizes = spec.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(gen.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(spec, weights, biases)


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def _logistic(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(model: MlpModel, inputs: np.ndarray, return_cache: bool = False):
    """Evaluate the network on rows of ``inputs`` (shape ``(B, input_dim)``).

    Returns predictions of shape ``(B,)``, plus the activation cache needed
    by :func:`backward` when ``return_cache`` is set.
    """
    a = np.asarray(inputs, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != model.spec.input_dim:
        raise ValueError(f"expected inputs of shape (B, {model.spec.input_dim}), got {a.shape}")
    cache = [(None, a)]
    n_layers = len(model.weights)
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        if l < n_layers - 1:
            a = _act(model.spec.hidden_activation, z)
        elif model.spec.output_activation == "logistic":
            a = _logistic(z)
        else:
            a = z
        cache.append((z, a))
    out = a[:, 0]
    return (out, cache) if return_cache else out


def action_inputs(x, w) -> np.ndarray:
    """Stack actions and contexts into network input rows ``[x, w]``."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 1:
        w = w.reshape(1, -1)
    x = np.broadcast_to(np.asarray(x, dtype=np.float64), (w.shape[0],))
    return np.column_stack([x, w])


def forward(model: MlpModel, x: int, w) -> float:
    """Prediction of a single-model network for action ``x`` at context ``w``."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if len(w) + 1 != model.spec.input_dim:
        raise ValueError(f"context has length {len(w)}, model expects {model.spec.input_dim - 1}")
    return float(forward_batch(model, action_inputs(x, w))[0])


def backward(model: MlpModel, inputs, dL_dpred, cache=None) -> Gradient:
    """Gradient of ``sum_j dL_dpred[j] * f(inputs[j])`` w.r.t. every parameter.

    ``inputs`` is a ``(B, input_dim)`` array.  Pass the cache from
    :func:`forward_batch` to avoid recomputing the forward pass.
    """
    dL = np.asarray(dL_dpred, dtype=np.float64).reshape(-1)
    if cache is None:
        _, cache = forward_batch(model, inputs, return_cache=True)
    if len(dL) != cache[0][1].shape[0]:
        raise ValueError(f"dL_dpred has length {len(dL)}, batch has {cache[0][1].shape[0]} rows")
    n_layers = len(model.weights)
    z, a = cache[-1]
    if model.spec.output_activation == "logistic":
        delta = (dL * a[:, 0] * (1.0 - a[:, 0]))[:, None]
    else:
        delta = dL[:, None]
    grads = [None] * (2 * n_layers)
    for l in range(n_layers - 1, -1, -1):
        a_prev = cache[l][1]
        grads[2 * l] = a_prev.T @ delta
        grads[2 * l + 1] = delta.sum(axis=0)
        if l > 0:
            z_prev, _ = cache[l]
            delta = (delta @ model.weights[l].T) * _act_grad(model.spec.hidden_activation, z_prev, a_prev)
    return grads


@dataclass
class OptimizerState:
    """SGD or Adam ("adam") state.

    Adam follows Kingma & Ba with bias correction:
    ``m <- b1 m + (1-b1) g``, ``v <- b2 v + (1-b2) g^2``,
    ``p <- p - lr * m_hat / (sqrt(v_hat) + eps)``.
    """

    method: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.method not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.method!r}")
        if not self.lr > 0:
            raise ValueError("step size must be positive")

    @classmethod
    def for_model(cls, model: MlpModel, method: str = "adam", lr: float = 1e-3, **kw) -> "OptimizerState":
        state = cls(method=method, lr=lr, **kw)
        if method == "adam":
            state.m = [np.zeros_like(p) for p in model.params()]
            state.v = [np.zeros_like(p) for p in model.params()]
        return state


def step(model: MlpModel, grad: Gradient, opt: OptimizerState) -> MlpModel:
    """Apply one optimizer update in place; returns ``model`` for chaining."""
    params = model.params()
    if len(grad) != len(params) or any(g.shape != p.shape for g, p in zip(grad, params)):
        raise ValueError("gradient does not match model parameter shapes")
    for i, g in enumerate(grad):
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(
                f"non-finite gradient in parameter block {i} at step {opt.t + 1}"
            )
    opt.t += 1
    if opt.method == "sgd":
        for p, g in zip(params, grad):
            p -= opt.lr * g
        return model
    if not opt.m:
        opt.m = [np.zeros_like(p) for p in params]
        opt.v = [np.zeros_like(p) for p in params]
    c1 = 1.0 - opt.beta1**opt.t
    c2 = 1.0 - opt.beta2**opt.t
    for p, g, m, v in zip(params, grad, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return model


# -- checkpoints -------------------------------------------------------------


def model_to_dict(model: MlpModel) -> dict:
    spec = model.spec
    return {
        "format_version": CHECKPOINT_VERSION,
        "spec": {
            "input_dim": spec.input_dim,
            "hidden": list(spec.hidden),
            "hidden_activation": spec.hidden_activation,
            "output_activation": spec.output_activation,
        },
        # W_1 (row-major, fan_in x fan_out), b_1, W_2, b_2, ...
        "params": [p.ravel().tolist() for p in model.params()],
    }


def model_from_dict(d: dict) -> MlpModel:
    if d.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {d.get('format_version')!r}")
    spec = MlpSpec(**d["spec"])
    sizes = spec.layer_sizes
    flat = d["params"]
    if len(flat) != 2 * (len(sizes) - 1):
        raise ValueError("checkpoint has the wrong number of parameter blocks")
    weights, biases = [], []
    for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        weights.append(np.array(flat[2 * l], dtype=np.float64).reshape(fan_in, fan_out))
        biases.append(np.array(flat[2 * l + 1], dtype=np.float64).reshape(fan_out))
    return MlpModel(spec, weights, biases)


def save_model(model: MlpModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> MlpModel:
    return model_from_dict(json.loads(Path(path).read_text()))
