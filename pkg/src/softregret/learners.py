"""Training recipes that turn a logged dataset into a decision policy.

``fit_esr`` and ``fit_direct`` train one network ``f(x, w)`` (action as an
input feature) on the ESR and MSE losses respectively.  The T-, R- and
DR-learners estimate the treatment effect and act on its sign.  All
learners share one architecture and optimizer configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import net
from .core import Dataset, as_rng
from .net import MlpSpec, OptimizerState, TrainingDivergedError, action_inputs
from .pairing import PairedIndex, pair
from .policy import Policy
from .regret import EsrConfig, esr_terms, mse_loss

__all__ = [
    "TrainConfig",
    "fit",
    "fit_esr",
    "fit_direct",
    "fit_t_learner",
    "fit_r_learner",
    "fit_dr_learner",
    "LEARNERS",
]

@dataclass(frozen=True)
class TrainConfig:
    loss: str = "esr"
    esr: EsrConfig = field(default_factory=EsrConfig)
    hidden: tuple = (64, 64)
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    optimizer: str = "adam"
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 128

    def __post_init__(self):
        if self.loss not in ("mse", "esr"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        object.__setattr__(self, "hidden", tuple(self.hidden))

    def spec(self, input_dim: int, output_activation: str | None = None) -> MlpSpec:
        return MlpSpec(
            input_dim,
            self.hidden,
            self.hidden_activation,
            output_activation or self.output_activation,
        )


def _batches(gen, n, batch_size):
    perm = gen.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def _check_finite(loss, what, epoch):
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"{what}: non-finite loss at epoch {epoch}")


def _train_mse(model, inputs, targets, cfg: TrainConfig, gen, what="mse"):
    """Minibatch MSE regression of ``targets`` on rows of ``inputs``."""
    opt = OptimizerState.for_model(model, cfg.optimizer, cfg.lr)
    n = len(targets)
    for epoch in range(cfg.epochs):
        for idx in _batches(gen, n, cfg.batch_size):
            preds, cache = net.forward_batch(model, inputs[idx], return_cache=True)
            loss, g = mse_loss(targets[idx], preds)
            _check_finite(loss, what, epoch)
            net.step(model, net.backward(model, None, g, cache), opt)
    return model


def _both_actions(ds: Dataset):
    for a in (0, 1):
        if not np.any(ds.x == a):
            raise ValueError(f"training data has no examples with action {a}")


def fit_esr(train: Dataset, cfg: TrainConfig, rng, pairs: PairedIndex | None = None) -> Policy:
    """Minimize the ESR loss over cross-action nearest-neighbour pairs.

    The pairing is computed once before training.  Each minibatch draws
    source rows ``i`` and evaluates the network at both ``i`` and ``n(i)``.
    """
    _both_actions(train)
    rng = as_rng(rng)
    if pairs is None:
        pairs = pair(train, rng.child("pairing"))
    partner = pairs.partner
    model = net.init(cfg.spec(train.dim + 1), rng.child("model"))
    opt = OptimizerState.for_model(model, cfg.optimizer, cfg.lr)
    gen = rng.generator("batches")
    inputs = action_inputs(train.x, train.w)
    y = train.y
    k = cfg.esr.k
    n = len(train)
    for epoch in range(cfg.epochs):
        for idx in _batches(gen, n, cfg.batch_size):
            jdx = partner[idx]
            b = len(idx)
            preds, cache = net.forward_batch(model, np.vstack([inputs[idx], inputs[jdx]]), return_cache=True)
            terms, dterm = esr_terms(y[idx], y[jdx], preds[:b], preds[b:], k)
            loss = terms.sum() / b
            _check_finite(loss, "esr", epoch)
            g = np.concatenate([dterm, -dterm]) / b
            net.step(model, net.backward(model, None, g, cache), opt)
    return Policy("single-model", [model])


def fit_direct(train: Dataset, cfg: TrainConfig, rng) -> Policy:
    """Direct method / S-learner: MSE regression of ``y`` on ``[x, w]``."""
    _both_actions(train)
    rng = as_rng(rng)
    model = net.init(cfg.spec(train.dim + 1), rng.child("model"))
    _train_mse(model, action_inputs(train.x, train.w), train.y, cfg, rng.generator("batches"), "direct")
    return Policy("single-model", [model])


def _arm_models(train: Dataset, cfg: TrainConfig, rng):
    models = []
    for a in (0, 1):
        arm = train.subset(np.flatnonzero(train.x == a))
        if len(arm) == 0:
            raise ValueError(f"training data has no examples with action {a}")
        # both arms share init and batch streams, so swapping the arms'
        # data swaps the fitted models exactly
        m = net.init(cfg.spec(train.dim), rng.child("arm"))
        _train_mse(m, arm.w, arm.y, cfg, rng.generator("arm_batches"), f"t-learner arm {a}")
        models.append(m)
    return models


def fit_t_learner(train: Dataset, cfg: TrainConfig, rng) -> Policy:
    """Separate outcome networks per arm; effect = ``f1(w) - f0(w)``."""
    return Policy("two-model", _arm_models(train, cfg, as_rng(rng)))


def _check_propensity(e):
    if not 0.0 < e < 1.0:
        raise ValueError(f"propensity must lie in (0, 1), got {e}")


def _halves(train: Dataset, rng):
    perm = rng.generator("nuisance_split").permutation(len(train))
    half = len(train) // 2
    return train.subset(perm[:half]), train.subset(perm[half:])


def fit_dr_learner(train: Dataset, cfg: TrainConfig, rng, propensity: float = 0.5) -> Policy:
    """DR-learner with a known constant propensity.

    Outcome networks are fit on one half; on the other half the
    pseudo-outcome ``(x - e) / (e (1 - e)) * (y - f_x(w)) + f1(w) - f0(w)``
    is regressed on ``w``.
    """
    _check_propensity(propensity)
    _both_actions(train)
    rng = as_rng(rng)
    nuisance, target = _halves(train, rng)
    f0, f1 = _arm_models(nuisance, replace(cfg, output_activation="identity"), rng.child("stage1"))
    phi = dr_pseudo_outcomes(target, f0, f1, propensity)
    tau = net.init(cfg.spec(train.dim, "identity"), rng.child("cate"))
    _train_mse(tau, target.w, phi, cfg, rng.generator("cate_batches"), "dr-learner")
    return Policy("cate-model", [tau])


def dr_pseudo_outcomes(ds: Dataset, f0, f1, propensity: float) -> np.ndarray:
    m0 = net.forward_batch(f0, ds.w)
    m1 = net.forward_batch(f1, ds.w)
    fitted = np.where(ds.x == 1, m1, m0)
    weight = (ds.x - propensity) / (propensity * (1.0 - propensity))
    return weight * (ds.y - fitted) + m1 - m0


def r_loss(tau_pred, residual, x, propensity):
    """Mean R-loss ``((y - m(w)) - (x - e) tau(w))^2`` and its gradient in ``tau``."""
    c = np.asarray(x, dtype=np.float64) - propensity
    r = residual - c * tau_pred
    n = len(r)
    return float(np.mean(r * r)), -2.0 * c * r / n


def fit_r_learner(train: Dataset, cfg: TrainConfig, rng, propensity: float = 0.5,
                  outcome_mean=None) -> Policy:
    """R-learner with a known constant propensity.

    The outcome mean ``m(w)`` is fit on one half; on the other half the
    effect network minimizes the R-loss.  Passing ``outcome_mean`` (a
    callable on context arrays) skips the first stage and uses all rows.
    """
    _check_propensity(propensity)
    _both_actions(train)
    rng = as_rng(rng)
    if outcome_mean is None:
        nuisance, target = _halves(train, rng)
        m = net.init(cfg.spec(train.dim, "identity"), rng.child("outcome_mean"))
        _train_mse(m, nuisance.w, nuisance.y, cfg, rng.generator("outcome_batches"), "r-learner m")
        outcome_mean = lambda w: net.forward_batch(m, w)  # noqa: E731
    else:
        target = train
    residual = target.y - outcome_mean(target.w)
    tau = net.init(cfg.spec(train.dim, "identity"), rng.child("cate"))
    opt = OptimizerState.for_model(tau, cfg.optimizer, cfg.lr)
    gen = rng.generator("cate_batches")
    for epoch in range(cfg.epochs):
        for idx in _batches(gen, len(target), cfg.batch_size):
            preds, cache = net.forward_batch(tau, target.w[idx], return_cache=True)
            loss, g = r_loss(preds, residual[idx], target.x[idx], propensity)
            _check_finite(loss, "r-learner", epoch)
            net.step(tau, net.backward(tau, None, g, cache), opt)
    return Policy("cate-model", [tau])


LEARNERS = {
    "esr": fit_esr,
    "direct": fit_direct,
    "t": fit_t_learner,
    "r": fit_r_learner,
    "dr": fit_dr_learner,
}


def fit(name: str, train: Dataset, cfg: TrainConfig, rng, propensity: float = 0.5) -> Policy:
    """Dispatch by learner name (``esr``, ``direct``, ``t``, ``r``, ``dr``)."""
    if name not in LEARNERS:
        raise ValueError(f"unknown learner {name!r}; choose from {sorted(LEARNERS)}")
    if name == "esr":
        return fit_esr(train, replace(cfg, loss="esr"), rng)
    if name == "direct":
        return fit_direct(train, replace(cfg, loss="mse"), rng)
    if name == "t":
        return fit_t_learner(train, replace(cfg, loss="mse"), rng)
    return LEARNERS[name](train, replace(cfg, loss="mse"), rng, propensity)
