"""Regression and regret losses, with gradients w.r.t. predictions.

The ESR loss for a paired dataset is

    L = (1/n) sum_i d_i * sigmoid(-k * s_i * u_i),

with ``d_i = |y_i - y_{n(i)}|``, ``s_i = sgn(y_i - y_{n(i)})`` and
``u_i = pred_i - pred_{n(i)}``.  Each summand equals
``d_i / (1 + exp(k s_i u_i))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Counterfactuals, Dataset
from .policy import decide_batch, margins

__all__ = [
    "EsrConfig",
    "PairTerm",
    "sigmoid",
    "mse_loss",
    "esr_pair_term",
    "esr_terms",
    "esr_loss",
    "hard_regret_paired",
    "soft_regret_paired",
    "consistent_k",
]

DEFAULT_K = 25.0
K_SWEEP = (1.0, 5.0, 10.0, 50.0, 100.0)


@dataclass(frozen=True)
class EsrConfig:
    k: float = DEFAULT_K

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k > 0):
            raise ValueError(f"k must be finite and positive, got {self.k}")


@dataclass(frozen=True)
class PairTerm:
    d: float
    s: int
    u: float

    def __post_init__(self):
        if self.s not in (-1, 0, 1) or self.d < 0 or ((self.s == 0) != (self.d == 0)):
            raise ValueError(f"inconsistent pair term {self}")

    @classmethod
    def from_outcomes(cls, y_i: float, y_partner: float, u: float) -> "PairTerm":
        diff = y_i - y_partner
        return cls(abs(diff), int(np.sign(diff)), u)


def consistent_k(n: int) -> float:
    """The smoothness schedule ``k = n^(1/4) * ln(n)``."""
    return float(n) ** 0.25 * np.log(n)


def sigmoid(z):
    """Logistic function without overflow for any finite input."""
    z = np.asarray(z, dtype=np.float64)
    # exp is only ever taken of a non-positive number
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def mse_loss(targets, preds):
    """Mean squared error and its gradient ``2 (pred - y) / n``."""
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    if len(y) != len(p):
        raise ValueError(f"length mismatch: {len(y)} targets, {len(p)} predictions")
    if len(y) == 0:
        raise ValueError("mse_loss of an empty vector")
    r = p - y
    return float(np.mean(r * r)), 2.0 * r / len(y)


def esr_pair_term(t: PairTerm, cfg: EsrConfig) -> float:
    """One ESR summand, ``d / (1 + exp(k s u))``."""
    if t.d == 0:
        return 0.0
    return float(t.d * sigmoid(-cfg.k * t.s * t.u))


def esr_terms(y_src, y_partner, pred_src, pred_partner, k: float):
    """Vectorized ESR summands and their derivatives.

    Returns ``(terms, dterm_du)`` where ``u = pred_src - pred_partner``.
    The derivative of ``d * sigmoid(-k s u)`` is ``-d k s sigmoid(t) sigmoid(-t)``
    with ``t = k s u``.
    """
    diff = np.asarray(y_src, dtype=np.float64) - np.asarray(y_partner, dtype=np.float64)
    d = np.abs(diff)
    s = np.sign(diff)
    u = np.asarray(pred_src, dtype=np.float64) - np.asarray(pred_partner, dtype=np.float64)
    t = k * s * u
    sig_neg = sigmoid(-t)
    terms = d * sig_neg
    dterm = -d * k * s * sig_neg * sigmoid(t)
    return terms, dterm


def esr_loss(ds: Dataset, pairs, preds, cfg: EsrConfig):
    """ESR loss over ``ds`` with partners ``pairs`` and its gradient.

    ``preds[i]`` is the model output at ``(x_i, w_i)``.  Returns
    ``(loss, grad)`` where ``grad`` has the shape of ``preds``.
    """
    partner = np.asarray(getattr(pairs, "partner", pairs), dtype=np.int64)
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    n = len(ds)
    if len(partner) != n or len(preds) != n:
        raise ValueError("pairs and preds must have one entry per example")
    if n == 0:
        raise ValueError("esr_loss of an empty dataset")
    if partner.min() < 0 or partner.max() >= n or np.any(ds.x[partner] == ds.x):
        raise ValueError("invalid pairing: partners must be in range with the opposite action")
    terms, dterm = esr_terms(ds.y, ds.y[partner], preds, preds[partner], cfg.k)
    grad = dterm / n
    out = np.zeros(n)
    np.add.at(out, partner, -grad)
    out += grad
    return float(np.sum(terms) / n), out


def hard_regret_paired(cfs: Counterfactuals, policy) -> float:
    """Mean of ``max(y0, y1) - y(chosen)`` with the policy's greedy choice."""
    if len(cfs) == 0:
        raise ValueError("hard regret of an empty counterfactual set")
    chosen = decide_batch(policy, cfs.w)
    achieved = np.where(chosen == 1, cfs.y1, cfs.y0)
    return float(np.mean(np.maximum(cfs.y0, cfs.y1) - achieved))


def soft_regret_paired(cfs: Counterfactuals, policy, cfg: EsrConfig) -> float:
    """Mean of ``|y1 - y0| / (1 + exp(k sgn(y1 - y0) * margin))``."""
    if len(cfs) == 0:
        raise ValueError("soft regret of an empty counterfactual set")
    terms, _ = esr_terms(cfs.y1, cfs.y0, margins(policy, cfs.w), 0.0, cfg.k)
    return float(np.mean(terms))
