"""ESR next to the usual treatment-effect learners.

The T-, R- and DR-learners estimate the effect ``E[y(1) - y(0) | w]`` and
treat when it is positive.  Here the effect is a small tilt on top of a
large shared level, the setting where effect estimation is hard.
"""

from softregret import SeededRng, TrainConfig, fit, hard_regret_paired, train_test_split
from softregret.regret import EsrConfig
from softregret.synth import GenConfig, gen_level_shift

ds, cf = gen_level_shift(GenConfig(n=2000, d=5, seed=4, amplitude=5.0))
rng = SeededRng(4)
train, _ = train_test_split(ds, 0.7, rng)
_, test = train_test_split(cf, 0.7, rng)
cfg = TrainConfig(hidden=(8, 8), hidden_activation="tanh", esr=EsrConfig(25.0))

for name in ("esr", "direct", "t", "r", "dr"):
    print(f"{name:>6}: test regret {hard_regret_paired(test, fit(name, train, cfg, rng)):.4f}")
