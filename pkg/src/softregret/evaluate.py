"""Policy evaluation and replication summaries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import NamedTuple

import numpy as np

from .core import Counterfactuals, Dataset
from .policy import decide_batch
from .regret import hard_regret_paired

__all__ = [
    "UndefinedEstimateError",
    "OffPolicyEstimate",
    "EvalReport",
    "offpolicy_value",
    "offpolicy_estimate",
    "match_rate",
    "regret_report",
    "confidence_interval",
]


class UndefinedEstimateError(ValueError):
    """No logged action agrees with the policy, so the estimate is 0/0."""


class OffPolicyEstimate(NamedTuple):
    value: float
    se: float
    n_matched: int
    n: int
    matched_sum: float


def offpolicy_estimate(policy, logs: Dataset) -> OffPolicyEstimate:
    """Matching estimator with its standard error.

    The value is the mean outcome over log entries whose action agrees with
    the policy.  Unbiased only for logs collected with uniformly random
    actions.  ``se`` is the sample standard deviation of the matched
    outcomes over ``sqrt(n_matched)`` (zero when fewer than two match).
    """
    if len(logs) == 0:
        raise UndefinedEstimateError("empty log")
    match = decide_batch(policy, logs.w) == logs.x
    m = int(match.sum())
    if m == 0:
        raise UndefinedEstimateError("no logged action matches the policy; estimate undefined")
    ym = logs.y[match]
    value = float(ym.mean())
    se = float(ym.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return OffPolicyEstimate(value, se, m, len(logs), float(ym.sum()))


def offpolicy_value(policy, logs: Dataset) -> float:
    """``sum 1{pi(w_i) = x_i} y_i / sum 1{pi(w_i) = x_i}``."""
    return offpolicy_estimate(policy, logs).value


def match_rate(policy, logs: Dataset) -> float:
    if len(logs) == 0:
        raise ValueError("match_rate of an empty log")
    return float(np.mean(decide_batch(policy, logs.w) == logs.x))


def regret_report(policy, cfs: Counterfactuals) -> float:
    return hard_regret_paired(cfs, policy)


def confidence_interval(values, level: float = 0.95) -> tuple[float, float]:
    """Normal-approximation interval ``mean +/- z * sd / sqrt(R)``."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if len(v) < 2:
        raise ValueError("need at least two values for a confidence interval")
    if not 0.0 <= level < 1.0:
        raise ValueError(f"level must lie in [0, 1), got {level}")
    if np.all(v == v[0]):
        return float(v[0]), float(v[0])
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    mean = float(v.mean())
    half = z * float(v.std(ddof=1)) / math.sqrt(len(v))
    return mean - half, mean + half


@dataclass
class EvalReport:
    metric: str
    values: list
    mean: float
    ci_low: float
    ci_high: float
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, metric: str, values, level: float = 0.95, **extra) -> "EvalReport":
        v = [float(x) for x in values]
        if not all(math.isfinite(x) for x in v):
            raise ValueError("report values must be finite")
        if not v:
            raise ValueError("no values to report")
        mean = float(np.mean(v))
        if len(v) >= 2:
            low, high = confidence_interval(v, level)
            # a zero-variance interval is exactly (mean, mean)
            low, high = min(low, mean), max(high, mean)
        else:
            low = high = mean
        return cls(metric, v, mean, low, high, dict(extra))

    @property
    def R(self) -> int:
        return len(self.values)

    def csv_row(self) -> str:
        return f"{self.metric},{self.mean!r},{self.ci_low!r},{self.ci_high!r},{self.R}"

    def to_json(self) -> str:
        return json.dumps(
            {
                "metric": self.metric,
                "mean": self.mean,
                "ci_low": self.ci_low,
                "ci_high": self.ci_high,
                "R": self.R,
                "values": self.values,
                **self.extra,
            }
        )
