"""Scoring a policy offline from uniformly logged clicks.

Logged actions were chosen by a fair coin, so the rows where the log agrees
with a candidate policy are a fair sample of what that policy would have
seen.  Their mean click rate estimates the policy's value; the simulator
knows the true value, so we can watch the estimate converge.
"""

import numpy as np

from softregret import SeededRng, TrainConfig, fit, offpolicy_estimate, train_test_split
from softregret.synth import GenConfig, LogisticLinear, gen_click_logs

p0 = LogisticLinear(-1.5, (1.0, -0.5, 0.0))
p1 = LogisticLinear(-1.2, (-0.8, 0.0, 0.6))
big, truth = gen_click_logs(GenConfig(n=1_000_000, d=3, seed=99), p0, p1)

for n in (1_000, 10_000, 100_000):
    logs, _ = gen_click_logs(GenConfig(n=n, d=3, seed=n), p0, p1)
    est = offpolicy_estimate(truth.oracle, logs)
    print(f"n={n:>7}: estimate {est.value:.4f} +/- {1.96 * est.se:.4f}   (true {truth.value(truth.oracle):.4f})")

logs, _ = gen_click_logs(GenConfig(n=20_000, d=3, seed=7), p0, p1)
train, test = train_test_split(logs, 0.7, SeededRng(7))
cfg = TrainConfig(hidden=(16,), hidden_activation="tanh", epochs=40)
for name in ("esr", "direct"):
    pol = fit(name, train, cfg, SeededRng(7))
    est = offpolicy_estimate(pol, test)
    print(f"{name:>6} learned from logs: estimated CTR {est.value:.4f}, true CTR {truth.value(pol):.4f}")
print(f"always action 0: {truth.value(lambda w: np.zeros(len(w), int)):.4f}, "
      f"always action 1: {truth.value(lambda w: np.ones(len(w), int)):.4f}")
