"""
The simulated option market
===========================

One year of 360 trading days under geometric Brownian motion. Every day
new strikes (multiples of 5 close to the money) are listed with eight
expiries, and every live contract is quoted daily until it expires.
"""

import numpy as np

from tvnet.market_sim import (
    SimConfig,
    build_dataset,
    build_expiry_test_set,
    build_tail_test_set,
    expiry_days_for,
    simulate_path,
    strikes_for,
)

config = SimConfig(s0=100.0, seed=0)

# the underlying path
path = simulate_path(config)
print(f"S(0) = {path[0]:.2f}, S(360) = {path[-1]:.2f}, min {path.min():.2f}, max {path.max():.2f}")

# what gets listed on day 0
print("strikes at S=100:", strikes_for(100.0))
print("expiry days for an option issued on day 0:", expiry_days_for(0))

# the training set: one row per (day, live contract)
train = build_dataset(config, "train")
print(f"\ntraining samples: {len(train)}")
print(f"  s in [{train.s.min():.3f}, {train.s.max():.3f}], tau in [{train.tau.min():.3f}, {train.tau.max():.3f}]")
print(f"  samples at expiry: {(train.tau == 0).sum()}")

# far from the money: strikes at S(0)/2 and 2 S(0), ten paths each
tail = build_tail_test_set(config)
print(f"\ntail test samples: {len(tail)}; s range {tail.s.min():.2f}..{tail.s.max():.2f}")

# expiring options with uniformly spread moneyness
expiry = build_expiry_test_set(50000, seed=0)
print(f"expiry test samples: {len(expiry)}, mean s = {expiry.s.mean():.4f} (uniform mean 1.025)")
print("largest time value in the expiry set:", np.max(expiry.timevalue))
