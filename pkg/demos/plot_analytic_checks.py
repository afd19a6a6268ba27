"""
Numerical checks of the analytic bounds
=======================================

Three inequalities behind the approximation argument, each evaluated on
a grid:

* the Gaussian tail bound ``1 - N(t) < exp(-t^2/2) / 2``;
* super-polynomial decay of the time value, through integrals over
  dyadic shells ``[2^j, 2^(j+1)] x [0, 1]``;
* exponential decay of the difference of two shifted logistic ridges.
"""

from tvnet import verify

print(verify.check_mills_bound().summary())
print()

for report in verify.check_timevalue_integrability(p_list=(1, 2), s_max_exponent=7):
    print(report.summary())
print()

for consts in verify.DEFAULT_RIDGE_CONSTANTS:
    print(verify.check_sigmoid_difference_bound(consts).summary())
