"""Simulated option market: GBM underlying, daily call issuance, datasets.

The simulated year has ``days_per_month * months`` days (360 by default).
Day ``d`` carries the price ``S(d)`` with ``S(0) = s0``; month ``m``
(1-based) ends on day ``m * days_per_month``. Options are issued on days
``0 .. n_days - 1`` and every live contract is quoted on each day from its
issue day through its expiry day (or the last simulated day, whichever
comes first). Time to maturity is ``(expiry_day - day) / year_days`` with
``year_days = 12 * days_per_month``.

Conventions that the protocol leaves open:

* The six "recent" months are the six month-ends strictly after the issue
  day; the two quarterly expiries are the first two quarter-end months
  (index divisible by 3) after the sixth of those.
* A (strike, expiry) pair that was already issued is not issued again.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from . import rng
from .pricing import MarketParams, bs_call_normalized, time_value_normalized

__all__ = [
    "SimConfig",
    "OptionContract",
    "Sample",
    "SampleSet",
    "simulate_path",
    "issue_options",
    "build_dataset",
    "build_tail_test_set",
    "build_expiry_test_set",
    "QUARTER_CONVENTION",
]

QUARTER_CONVENTION = "quarter-ends are months 3,6,9,12,...; two taken strictly after the sixth month-end following the issue day"

STRIKE_STEP = 5.0
MONEYNESS_LO = 0.8
MONEYNESS_HI = 1.25

# stream keys under the dataset seed
_TRAIN, _VALIDATION, _TAIL, _EXPIRY = 0, 1, 2, 3
_ROLE_KEYS = {"train": _TRAIN, "validation": _VALIDATION}


@dataclass(frozen=True)
class SimConfig:
    s0: float = 100.0
    params: MarketParams = field(default_factory=lambda: MarketParams(r=0.02, q=0.0, sigma=0.2, mu=0.1))
    days_per_month: int = 30
    months: int = 12
    seed: int = 0

    def __post_init__(self):
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")
        if self.days_per_month < 1 or self.months < 1:
            raise ValueError("days_per_month and months must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_days(self) -> int:
        return self.days_per_month * self.months

    @property
    def year_days(self) -> int:
        return self.days_per_month * 12


@dataclass(frozen=True, order=True)
class OptionContract:
    strike: float
    expiry_day: int
    issue_day: int


class Sample(NamedTuple):
    s: float
    tau: float
    target_price: float
    target_timevalue: float


@dataclass
class SampleSet:
    """Column-oriented collection of samples.

    ``price`` is ``C/K`` and ``timevalue`` is ``V/K``.
    """

    s: np.ndarray
    tau: np.ndarray
    price: np.ndarray
    timevalue: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.tau = np.asarray(self.tau, dtype=float)
        self.price = np.asarray(self.price, dtype=float)
        self.timevalue = np.asarray(self.timevalue, dtype=float)
        n = len(self.s)
        if not (len(self.tau) == len(self.price) == len(self.timevalue) == n):
            raise ValueError("sample columns must have equal length")

    @classmethod
    def from_quotes(cls, s, tau, params: MarketParams) -> "SampleSet":
        """Targets from the Black-Scholes formula."""
        s = np.asarray(s, dtype=float)
        tau = np.asarray(tau, dtype=float)
        return cls(s, tau, bs_call_normalized(s, tau, params), time_value_normalized(s, tau, params))

    @classmethod
    def empty(cls) -> "SampleSet":
        return cls(np.empty(0), np.empty(0), np.empty(0), np.empty(0))

    @classmethod
    def concat(cls, parts) -> "SampleSet":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, c) for p in parts]) for c in ("s", "tau", "price", "timevalue")))

    def __len__(self) -> int:
        return len(self.s)

    def __iter__(self) -> Iterator[Sample]:
        for row in zip(self.s.tolist(), self.tau.tolist(), self.price.tolist(), self.timevalue.tolist()):
            yield Sample(*row)

    def __getitem__(self, idx) -> "SampleSet":
        if isinstance(idx, (int, np.integer)):
            idx = [idx]
        return SampleSet(self.s[idx], self.tau[idx], self.price[idx], self.timevalue[idx])

    def targets(self, selector: str) -> np.ndarray:
        if selector == "price":
            return self.price
        if selector == "timevalue":
            return self.timevalue
        raise ValueError(f"unknown target selector {selector!r}; expected 'price' or 'timevalue'")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "tau", "c_over_k", "v_over_k"])
            for row in zip(self.s.tolist(), self.tau.tolist(), self.price.tolist(), self.timevalue.tolist()):
                w.writerow([repr(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            return cls.empty()
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def simulate_path(config: SimConfig, key: tuple = ()) -> np.ndarray:
    """Daily prices ``S(0..n_days)`` of a geometric Brownian motion.

    Daily log returns are i.i.d. ``N(mu/year_days, sigma^2/year_days)`` drawn
    from the stream ``(config.seed, *key)``.
    """
    p = config.params
    yd = config.year_days
    z = rng.standard_normal(rng.stream(config.seed, *key), config.n_days)
    log_returns = p.mu / yd + p.sigma / math.sqrt(yd) * z
    return config.s0 * np.exp(np.concatenate(([0.0], np.cumsum(log_returns))))


def strikes_for(price: float) -> list[float]:
    """Multiples of 5 with ``0.8 < price/K < 1.25``."""
    lo = math.floor(price / MONEYNESS_HI / STRIKE_STEP)
    hi = math.ceil(price / MONEYNESS_LO / STRIKE_STEP)
    out = []
    for n in range(max(lo, 1), hi + 1):
        k = n * STRIKE_STEP
        if MONEYNESS_LO < price / k < MONEYNESS_HI:
            out.append(k)
    return out


def expiry_days_for(day: int, days_per_month: int = 30) -> list[int]:
    first = day // days_per_month + 1
    months = list(range(first, first + 6))
    q = (months[-1] // 3 + 1) * 3
    months += [q, q + 3]
    return [m * days_per_month for m in months]


def issue_options(day: int, price: float, issued: set | None = None, days_per_month: int = 30) -> list[OptionContract]:
    """Contracts opened on ``day`` at underlying ``price``.

    ``issued`` holds the (strike, expiry_day) pairs already on the book; new
    pairs are added to it and existing ones skipped.
    """
    out = []
    expiries = expiry_days_for(day, days_per_month)
    for k in strikes_for(price):
        for e in expiries:
            if issued is not None:
                if (k, e) in issued:
                    continue
                issued.add((k, e))
            out.append(OptionContract(strike=k, expiry_day=e, issue_day=day))
    return out


def _quote_contracts(path, contracts, config: SimConfig) -> SampleSet:
    last = config.n_days
    s_parts, tau_parts = [], []
    for c in contracts:
        days = np.arange(c.issue_day, min(c.expiry_day, last) + 1)
        s_parts.append(path[days] / c.strike)
        tau_parts.append((c.expiry_day - days) / config.year_days)
    if not s_parts:
        return SampleSet.empty()
    return SampleSet.from_quotes(np.concatenate(s_parts), np.concatenate(tau_parts), config.params)


def simulate_contracts(config: SimConfig, key: tuple = ()) -> tuple[np.ndarray, list[OptionContract]]:
    path = simulate_path(config, key)
    issued: set = set()
    contracts: list[OptionContract] = []
    for day in range(config.n_days):
        contracts.extend(issue_options(day, float(path[day]), issued, config.days_per_month))
    return path, contracts


def build_dataset(config: SimConfig, role: str = "train") -> SampleSet:
    """One simulated year of daily quotes for every live contract.

    ``role`` selects an independent stream (``train`` or ``validation``)
    under the same seed; the construction is otherwise identical.
    """
    if role not in _ROLE_KEYS:
        raise ValueError(f"role must be 'train' or 'validation', got {role!r}")
    path, contracts = simulate_contracts(config, (_ROLE_KEYS[role],))
    return _quote_contracts(path, contracts, config)


def build_tail_test_set(config: SimConfig, ratios=(0.5, 2.0), n_series: int = 10) -> SampleSet:
    """Far-from-the-money test quotes.

    For each ratio ``S(0)/K`` and each of ``n_series`` independent paths, one
    contract with strike ``s0/ratio`` expiring on the last day is quoted on
    days ``0 .. n_days - 1``. Series streams are keyed by the ratio in
    millionths, so ``ratios=(2.0,)`` reproduces the 2.0 part of the default set.
    """
    parts = []
    for ratio in ratios:
        if not ratio > 0:
            raise ValueError("ratios must be positive")
        strike = config.s0 / ratio
        for j in range(n_series):
            path = simulate_path(config, (_TAIL, round(ratio * 1_000_000), j))
            days = np.arange(config.n_days)
            parts.append(SampleSet.from_quotes(path[days] / strike, (config.n_days - days) / config.year_days, config.params))
    return SampleSet.concat(parts)


def build_expiry_test_set(n: int = 50000, seed: int = 0) -> SampleSet:
    """``n`` expiring quotes with ``s ~ Uniform(0.8, 1.25)`` on the open interval."""
    if n <= 0:
        raise ValueError("n must be positive")
    u = rng.open_uniform(rng.stream(seed, _EXPIRY), n)
    s = MONEYNESS_LO + (MONEYNESS_HI - MONEYNESS_LO) * u
    s = np.clip(s, np.nextafter(MONEYNESS_LO, 2.0), np.nextafter(MONEYNESS_HI, 0.0))
    zero = np.zeros(n)
    return SampleSet(s, zero, np.maximum(s - 1.0, 0.0), zero.copy())
