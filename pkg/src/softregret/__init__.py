"""Decision-focused learning for binary actions with the Empirical Soft Regret loss.

Train a small network so that acting greedily on its predictions minimizes
regret, compare against MSE-trained and CATE metalearner baselines, and
score policies by exact regret or by off-policy value on uniform logs.
"""

from .core import (
    Counterfactuals,
    Dataset,
    SeededRng,
    read_counterfactuals,
    read_dataset,
    train_test_split,
    validate_dataset,
    write_counterfactuals,
    write_dataset,
)
from .evaluate import EvalReport, confidence_interval, match_rate, offpolicy_estimate, offpolicy_value
from .learners import TrainConfig, fit, fit_direct, fit_dr_learner, fit_esr, fit_r_learner, fit_t_learner
from .pairing import pair
from .policy import Policy, decide, decide_batch, load_policy, save_policy
from .regret import EsrConfig, esr_loss, hard_regret_paired, soft_regret_paired, consistent_k

__version__ = "0.1.0"

__all__ = [
    "Counterfactuals",
    "Dataset",
    "SeededRng",
    "read_counterfactuals",
    "read_dataset",
    "train_test_split",
    "validate_dataset",
    "write_counterfactuals",
    "write_dataset",
    "EvalReport",
    "confidence_interval",
    "match_rate",
    "offpolicy_estimate",
    "offpolicy_value",
    "TrainConfig",
    "fit",
    "fit_direct",
    "fit_dr_learner",
    "fit_esr",
    "fit_r_learner",
    "fit_t_learner",
    "pair",
    "Policy",
    "decide",
    "decide_batch",
    "load_policy",
    "save_policy",
    "EsrConfig",
    "esr_loss",
    "hard_regret_paired",
    "soft_regret_paired",
    "consistent_k",
]
