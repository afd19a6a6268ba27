"""Option pricing networks trained on Black-Scholes time values.

Submodules: :mod:`~tvnet.pricing`, :mod:`~tvnet.market_sim`,
:mod:`~tvnet.neural`, :mod:`~tvnet.experiment`, :mod:`~tvnet.marketdata`,
:mod:`~tvnet.verify`, :mod:`~tvnet.cli`.
"""

from .pricing import (
    MarketParams,
    bs_call_normalized,
    d1_d2,
    intrinsic_normalized,
    std_normal_cdf,
    time_value_normalized,
)

__version__ = "0.1.0"
