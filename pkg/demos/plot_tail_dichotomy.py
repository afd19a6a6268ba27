"""
Why a bounded network cannot price deep in the money
====================================================

A sigmoid network's output is bounded by the sum of its output weights,
while the price grows linearly in s. The time-value network only has to
learn something that decays, and the intrinsic value is added back
exactly.
"""

import numpy as np

from tvnet import verify
from tvnet.experiment import ExperimentConfig, run_trial

EPOCHS = 20

trial = run_trial(ExperimentConfig(activation="sigmoid", epochs=EPOCHS, n_trials=1), 0)
probe = verify.tail_generalization_probe(
    trial.params["price"], trial.params["timevalue"], "sigmoid", s_grid=np.linspace(2, 10, 5), tau_grid=[1.0]
)

print(f"price-model output bound: sum|alpha| = {probe.price_net_bound:.3f}")
print(f"{'s':>5} {'C/K':>8} {'V/K':>10} {'price err':>10} {'tv err':>10}")
for s, f, g, pe, te in zip(probe.s, probe.f, probe.g, probe.price_error, probe.timevalue_error):
    print(f"{s:5.1f} {f:8.4f} {g:10.2e} {pe:10.4f} {te:10.4f}")
