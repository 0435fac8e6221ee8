"""Greedy decision policies built on fitted networks."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .net import action_inputs, forward_batch, model_from_dict, model_to_dict

__all__ = ["Policy", "decide", "decide_batch", "margins", "save_policy", "load_policy"]

KINDS = ("single-model", "two-model", "cate-model")


@dataclass
class Policy:
    """A fixed decision rule.

    kind
        ``"single-model"``: one network ``f(x, w)`` with the action as input;
        ``"two-model"``: ``models = [f0, f1]`` over contexts only;
        ``"cate-model"``: one network ``tau(w)`` estimating ``y(1) - y(0)``.
    tie_break
        Action taken when the predicted margin is exactly zero.
    """

    kind: str
    models: list
    tie_break: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.tie_break not in (0, 1):
            raise ValueError("tie_break must be 0 or 1")
        expected = 2 if self.kind == "two-model" else 1
        if len(self.models) != expected:
            raise ValueError(f"{self.kind} policy needs {expected} model(s), got {len(self.models)}")
        dims = {m.spec.input_dim for m in self.models}
        if len(dims) != 1:
            raise ValueError("two-model policy models must share an input dimension")

    @property
    def context_dim(self) -> int:
        d = self.models[0].spec.input_dim
        return d - 1 if self.kind == "single-model" else d


def margins(policy: Policy, w) -> np.ndarray:
    """Predicted advantage of action 1 over action 0 at each context row."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 1:
        w = w.reshape(1, -1)
    if w.shape[1] != policy.context_dim:
        raise ValueError(f"contexts have dimension {w.shape[1]}, policy expects {policy.context_dim}")
    if policy.kind == "single-model":
        m = policy.models[0]
        return forward_batch(m, action_inputs(1.0, w)) - forward_batch(m, action_inputs(0.0, w))
    if policy.kind == "two-model":
        f0, f1 = policy.models
        return forward_batch(f1, w) - forward_batch(f0, w)
    return forward_batch(policy.models[0], w)


def decide_batch(policy, w) -> np.ndarray:
    """Actions for each context row.

    ``policy`` may also be any callable mapping a ``(n, d)`` context array
    to 0/1 actions, which is convenient for oracle policies in simulations.
    """
    if not isinstance(policy, Policy):
        return np.asarray(policy(np.asarray(w, dtype=np.float64)), dtype=np.int64).reshape(-1)
    m = margins(policy, w)
    out = np.where(m > 0, 1, 0)
    out[m == 0] = policy.tie_break
    return out


def decide(policy, w) -> int:
    """Greedy action for a single context."""
    w = np.asarray(w, dtype=np.float64).reshape(1, -1)
    return int(decide_batch(policy, w)[0])


def policy_to_dict(policy: Policy) -> dict:
    return {
        "kind": policy.kind,
        "tie_break": policy.tie_break,
        "models": [model_to_dict(m) for m in policy.models],
    }


def policy_from_dict(d: dict) -> Policy:
    return Policy(d["kind"], [model_from_dict(m) for m in d["models"]], int(d.get("tie_break", 0)))


def save_policy(policy: Policy, path) -> None:
    Path(path).write_text(json.dumps(policy_to_dict(policy)))


def load_policy(path) -> Policy:
    return policy_from_dict(json.loads(Path(path).read_text()))
