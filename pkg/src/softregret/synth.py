"""Synthetic data generators.

level shift
    ``w ~ U[-1, 1]^d``, effect ``tau(w) = w_1``, level
    ``a(w) = A sin(omega * sum(w))``; ``y(x) = a(w) + x tau(w) + noise``.
    The level term changes the MSE-optimal fit but not the best action.
paired
    The level-shift model with every context logged under both actions.
log-linear
    ``w ~ N(0, I)``; ``y(0) = exp((w + 0.5)' beta)``,
    ``y(1) = w' beta - omega`` with ``omega`` set so the sample mean effect
    is exactly 4.  Coordinates of ``beta`` are drawn from
    ``{0, .1, .2, .3, .4}`` with probabilities ``(.6, .1, .1, .1, .1)``.
    This is an IHDP-style analog with synthetic covariates.
click logs
    ``w ~ U[-1, 1]^d``, click probabilities logistic-linear in ``w``,
    uniformly random logged actions.

Counterfactual tables hold the noiseless means in ``y0``/``y1`` and the
per-arm draws used for logging in ``y0_draw``/``y1_draw``.  Each generator
draws all of its randomness from one PCG64 stream keyed by the config seed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import Counterfactuals, Dataset, SeededRng
from .policy import decide_batch

__all__ = [
    "GenConfig",
    "LogisticLinear",
    "ClickTruth",
    "gen_level_shift",
    "gen_paired",
    "gen_loglinear",
    "gen_click_logs",
]

BETA_VALUES = (0.0, 0.1, 0.2, 0.3, 0.4)
BETA_PROBS = (0.6, 0.1, 0.1, 0.1, 0.1)
LOGLINEAR_TARGET_EFFECT = 4.0


@dataclass(frozen=True)
class GenConfig:
    n: int
    d: int = 5
    noise_sd: float = 0.1
    seed: int = 0
    amplitude: float = 0.0
    frequency: float = 3.0
    beta_values: tuple = BETA_VALUES
    beta_probs: tuple = BETA_PROBS
    target_effect: float = LOGLINEAR_TARGET_EFFECT

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if int(self.d) < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not self.noise_sd >= 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if len(self.beta_values) != len(self.beta_probs) or not np.isclose(sum(self.beta_probs), 1.0):
            raise ValueError("beta_probs must be a distribution over beta_values")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["beta_values"] = list(self.beta_values)
        out["beta_probs"] = list(self.beta_probs)
        return out


def _level_shift_means(w, amplitude, frequency):
    level = amplitude * np.sin(frequency * w.sum(axis=1))
    return level, level + w[:, 0]


def gen_level_shift(cfg: GenConfig):
    """Uniformly logged level-shift data and its counterfactual table."""
    gen = SeededRng(cfg.seed).generator("level_shift")
    w = gen.uniform(-1.0, 1.0, size=(cfg.n, cfg.d))
    mu0, mu1 = _level_shift_means(w, cfg.amplitude, cfg.frequency)
    eps = gen.normal(0.0, 1.0, size=(cfg.n, 2)) * cfg.noise_sd
    x = gen.integers(0, 2, size=cfg.n)
    y0_draw, y1_draw = mu0 + eps[:, 0], mu1 + eps[:, 1]
    y = np.where(x == 1, y1_draw, y0_draw)
    return Dataset(w, x, y), Counterfactuals(w, mu0, mu1, y0_draw, y1_draw)


def gen_paired(cfg: GenConfig):
    """Level-shift contexts each logged under both actions.

    Returns ``(counterfactuals, dataset)``; rows ``2i`` and ``2i + 1`` of the
    dataset hold context ``i`` with actions 0 and 1.
    """
    gen = SeededRng(cfg.seed).generator("paired")
    w = gen.uniform(-1.0, 1.0, size=(cfg.n, cfg.d))
    mu0, mu1 = _level_shift_means(w, cfg.amplitude, cfg.frequency)
    eps = gen.normal(0.0, 1.0, size=(cfg.n, 2)) * cfg.noise_sd
    y0_draw, y1_draw = mu0 + eps[:, 0], mu1 + eps[:, 1]
    ds = Dataset(
        np.repeat(w, 2, axis=0),
        np.tile([0, 1], cfg.n),
        np.column_stack([y0_draw, y1_draw]).ravel(),
    )
    return Counterfactuals(w, mu0, mu1, y0_draw, y1_draw), ds


def gen_loglinear(cfg: GenConfig):
    """Log-linear response surfaces; returns ``(dataset, counterfactuals, truth)``.

    ``truth`` holds ``beta`` and the calibrated ``omega``.
    """
    gen = SeededRng(cfg.seed).generator("loglinear")
    w = gen.normal(0.0, 1.0, size=(cfg.n, cfg.d))
    beta = gen.choice(np.asarray(cfg.beta_values, dtype=np.float64), size=cfg.d, p=cfg.beta_probs)
    mu0 = np.exp((w + 0.5) @ beta)
    lin = w @ beta
    omega = float(np.mean(lin - mu0) - cfg.target_effect)
    mu1 = lin - omega
    eps = gen.normal(0.0, 1.0, size=(cfg.n, 2)) * cfg.noise_sd
    x = gen.integers(0, 2, size=cfg.n)
    y0_draw, y1_draw = mu0 + eps[:, 0], mu1 + eps[:, 1]
    y = np.where(x == 1, y1_draw, y0_draw)
    truth = {"beta": beta.tolist(), "omega": omega}
    return Dataset(w, x, y), Counterfactuals(w, mu0, mu1, y0_draw, y1_draw), truth


@dataclass(frozen=True)
class LogisticLinear:
    """Click probability ``p(w) = 1 / (1 + exp(-(intercept + coef' w)))``."""

    intercept: float
    coef: tuple = field(default_factory=tuple)

    def __call__(self, w) -> np.ndarray:
        w = np.atleast_2d(np.asarray(w, dtype=np.float64))
        coef = np.zeros(w.shape[1]) if len(self.coef) == 0 else np.asarray(self.coef, dtype=np.float64)
        if len(coef) != w.shape[1]:
            raise ValueError(f"coef has length {len(coef)}, contexts have dimension {w.shape[1]}")
        z = self.intercept + w @ coef
        e = np.exp(-np.abs(z))
        return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    @classmethod
    def constant(cls, p: float) -> "LogisticLinear":
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        return cls(float(np.log(p / (1.0 - p))))

    def to_dict(self) -> dict:
        return {"intercept": self.intercept, "coef": list(self.coef)}


@dataclass(frozen=True, eq=False)
class ClickTruth:
    """Known click model behind a simulated log."""

    w: np.ndarray
    p0: LogisticLinear
    p1: LogisticLinear

    def value(self, policy) -> float:
        """True value of a deterministic policy: mean of ``p_{pi(w)}(w)`` over the logged contexts."""
        a = decide_batch(policy, self.w)
        return float(np.mean(np.where(a == 1, self.p1(self.w), self.p0(self.w))))

    def oracle(self, w) -> np.ndarray:
        """Best action under the true click model (ties go to action 0)."""
        return (self.p1(w) > self.p0(w)).astype(np.int64)

    def to_dict(self) -> dict:
        return {"p0": self.p0.to_dict(), "p1": self.p1.to_dict()}


def gen_click_logs(cfg: GenConfig, p0: LogisticLinear, p1: LogisticLinear):
    """Uniform-logging click simulation; returns ``(dataset, truth)``."""
    gen = SeededRng(cfg.seed).generator("clicks")
    w = gen.uniform(-1.0, 1.0, size=(cfg.n, cfg.d))
    x = gen.integers(0, 2, size=cfg.n)
    p = np.where(x == 1, p1(w), p0(w))
    y = (gen.random(cfg.n) < p).astype(np.float64)
    return Dataset(w, x, y), ClickTruth(w, p0, p1)
