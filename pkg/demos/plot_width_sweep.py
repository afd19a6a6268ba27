"""
Fitting the time value with wider networks
==========================================

An illustration, not a proof: the L2 error of the best k-unit logistic
network fitted to the time value on a truncated domain, for growing k.
"""

from tvnet import verify

sweep = verify.empirical_uat_sweep(k_list=(1, 2, 4, 8), truncations=((0.0, 4.0), (0.0, 8.0)), n_seeds=2)
print(sweep.summary())
