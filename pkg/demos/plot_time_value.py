"""
Price, intrinsic value and time value
=====================================

A strike-normalized call splits into a discounted intrinsic part and a
time value. The time value is what the second network learns; unlike the
price it dies off in both tails.
"""

import numpy as np

from tvnet.pricing import MarketParams, bs_call_normalized, intrinsic_normalized, time_value_normalized

params = MarketParams(r=0.02, q=0.0, sigma=0.2)

# a moneyness ladder at one year to expiry
s = np.array([0.25, 0.5, 0.8, 1.0, 1.25, 2.0, 4.0, 10.0, 20.0])
f = bs_call_normalized(s, 1.0, params)
iv = intrinsic_normalized(s, 1.0, params)
g = time_value_normalized(s, 1.0, params)

print(f"{'s':>6} {'C/K':>12} {'intrinsic':>12} {'time value':>12}")
for row in zip(s, f, iv, g):
    print("{:6.2f} {:12.6g} {:12.6g} {:12.6g}".format(*row))

# the price grows like s, the time value vanishes
print("\nC/K at s=20 is", f[-1], "while V/K is", g[-1])

# at expiry the price is the payoff and the time value is exactly zero
print("expiry:", bs_call_normalized(1.3, 0.0, params), time_value_normalized(1.3, 0.0, params))
