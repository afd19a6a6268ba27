"""
One paired training trial
=========================

Two four-unit sigmoid networks see the same data and the same minibatch
order. The first learns C/K, the second learns the time value V/K. Each is
scored in its own target space after every epoch.

Set ``EPOCHS = 100`` for the full protocol (about ten seconds on one core).
"""

import numpy as np

from tvnet.experiment import ExperimentConfig, run_trial

EPOCHS = 10

config = ExperimentConfig(activation="sigmoid", k=4, epochs=EPOCHS, n_trials=1)
result = run_trial(config, trial_index=0)

print(f"final log10(MSE) after {EPOCHS} epochs")
print(f"{'role':>12} {'price model':>12} {'time value':>12}")
for role in ("train", "validation", "tail_0.5", "tail_2.0", "expiry"):
    p = np.log10(result.final("price", role))
    t = np.log10(result.final("timevalue", role))
    print(f"{role:>12} {p:12.3f} {t:12.3f}")

# the learning curve of the time-value model on the far in-the-money set
print("\ntail_2.0 curve:", np.round(np.log10(result.curves[("timevalue", "tail_2.0")]), 2))
