"""Strike-normalized Black-Scholes call pricing and its time-value split.

Every quantity is divided by the strike: the inputs are the moneyness
``s = S/K`` and the time to maturity ``tau`` in years, the outputs are
``C/K`` (:func:`bs_call_normalized`), the discounted intrinsic value
(:func:`intrinsic_normalized`) and the time value ``V/K``
(:func:`time_value_normalized`).

All functions accept scalars or numpy arrays and broadcast like numpy
ufuncs. Scalar inputs return Python floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

__all__ = [
    "MarketParams",
    "NormalizedQuote",
    "std_normal_cdf",
    "d1_d2",
    "bs_call_normalized",
    "intrinsic_normalized",
    "time_value_normalized",
]


@dataclass(frozen=True)
class MarketParams:
    """Constant market parameters, all per year.

    ``mu`` is the physical drift and only matters to the path simulator.
    ``sigma = 0`` is accepted so that degenerate (deterministic) paths can
    be simulated; the call then prices at its zero-volatility limit, the
    discounted forward intrinsic value, with no time value.
    """

    r: float = 0.02
    q: float = 0.0
    sigma: float = 0.2
    mu: float = 0.1

    def __post_init__(self):
        for name in ("r", "q", "sigma", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.q < 0:
            raise ValueError(f"dividend yield q must be non-negative, got {self.q}")


class NormalizedQuote(NamedTuple):
    s: float
    tau: float


def _scalar_or_array(x, scalar):
    if scalar:
        return float(x)
    return x


def _prepare(s, tau):
    scalar = np.ndim(s) == 0 and np.ndim(tau) == 0
    s, tau = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(tau, dtype=float))
    if np.any(~(s > 0)):
        raise ValueError("moneyness s must be positive")
    if np.any(~(tau >= 0)):
        raise ValueError("time to maturity tau must be non-negative")
    return s, tau, scalar


def std_normal_cdf(x):
    """Standard normal CDF.

    Backed by the Cephes ``ndtr`` routine, which evaluates through ``erf``
    near the origin and ``erfc`` in the tails, so both tails keep full
    relative precision.
    """
    out = ndtr(np.asarray(x, dtype=float))
    return _scalar_or_array(out, np.ndim(x) == 0)


def d1_d2(s, tau, params: MarketParams):
    """Return ``(d1, d2)``; ``tau`` must be strictly positive."""
    scalar = np.ndim(s) == 0 and np.ndim(tau) == 0
    s = np.asarray(s, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(~(tau > 0)):
        raise ValueError("d1/d2 are singular at tau = 0; use the expiry limit")
    if np.any(~(s > 0)):
        raise ValueError("moneyness s must be positive")
    if not params.sigma > 0:
        raise ValueError("d1/d2 need sigma > 0")
    vol = params.sigma * np.sqrt(tau)
    d1 = (np.log(s) + (params.r - params.q + 0.5 * params.sigma**2) * tau) / vol
    d2 = d1 - vol
    if scalar:
        return float(d1), float(d2)
    return d1, d2


def intrinsic_normalized(s, tau, params: MarketParams):
    """Discounted intrinsic value ``(s e^{-q tau} - e^{-r tau})^+``."""
    s, tau, scalar = _prepare(s, tau)
    out = np.maximum(s * np.exp(-params.q * tau) - np.exp(-params.r * tau), 0.0)
    return _scalar_or_array(out, scalar)


def time_value_normalized(s, tau, params: MarketParams):
    """Time value ``g = f - intrinsic`` of a strike-normalized European call.

    Evaluated without cancellation: out of the forward money ``g`` is the
    call itself, in the money it equals the put (put-call parity), and each
    is computed from the small normal tail it is made of. ``g(s, 0) = 0``,
    and ``g`` vanishes identically when ``sigma = 0``.
    """
    s, tau, scalar = _prepare(s, tau)
    g = np.zeros(s.shape)
    live = tau > 0
    if params.sigma > 0 and np.any(live):
        sl, tl = s[live], tau[live]
        d1, d2 = d1_d2(sl, tl, params)
        disc_s = sl * np.exp(-params.q * tl)
        disc_k = np.exp(-params.r * tl)
        call = disc_s * ndtr(d1) - disc_k * ndtr(d2)
        put = disc_k * ndtr(-d2) - disc_s * ndtr(-d1)
        g[live] = np.maximum(np.where(disc_s >= disc_k, put, call), 0.0)
    return _scalar_or_array(g, scalar)


def bs_call_normalized(s, tau, params: MarketParams):
    """Black-Scholes call price divided by strike, ``f(s, tau)``.

    Built as time value plus intrinsic value so that the decomposition is
    exact up to one rounding. At ``tau = 0`` this is the payoff ``(s - 1)^+``.
    """
    s, tau, scalar = _prepare(s, tau)
    out = time_value_normalized(s, tau, params) + intrinsic_normalized(s, tau, params)
    return _scalar_or_array(out, scalar)
