"""Minute-bar option data: CSV parsing, sample conversion and splits.

Expected header::

    timestamp_utc,underlying_close,option_close,strike,expiry_utc

Timestamps are ISO-8601; a trailing ``Z`` or explicit offset is honoured and
naive timestamps are read as UTC.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import NamedTuple, Sequence

import numpy as np

from . import rng
from .market_sim import SampleSet
from .pricing import MarketParams, intrinsic_normalized

__all__ = [
    "MarketBar",
    "IngestError",
    "SplitSpec",
    "parse_split",
    "read_market_bars",
    "bars_to_samples",
    "split_samples",
    "ingest_market_csv",
]

HEADER = ["timestamp_utc", "underlying_close", "option_close", "strike", "expiry_utc"]
DAYCOUNTS = (365, 360, 252)


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class MarketBar:
    timestamp: datetime
    underlying_close: float
    option_close: float
    strike: float
    expiry: datetime


class SplitSpec(NamedTuple):
    kind: str
    fraction: float
    seed: int | None = None


def parse_split(text: str) -> SplitSpec:
    """``random:<fraction>[:<seed>]`` or ``chronological:<fraction>``."""
    parts = text.strip().split(":")
    kind = parts[0]
    try:
        if kind == "random" and len(parts) in (2, 3):
            seed = int(parts[2]) if len(parts) == 3 else None
            spec = SplitSpec("random", float(parts[1]), seed)
        elif kind == "chronological" and len(parts) == 2:
            spec = SplitSpec("chronological", float(parts[1]))
        else:
            raise ValueError
    except ValueError:
        raise ValueError(f"bad split {text!r}; expected random:<fraction>[:<seed>] or chronological:<fraction>") from None
    if not 0.0 < spec.fraction < 1.0:
        raise ValueError(f"split fraction must lie in (0, 1), got {spec.fraction}")
    return spec


def _parse_time(text: str) -> datetime:
    t = text.strip()
    if t.endswith(("Z", "z")):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def read_market_bars(paths) -> list[MarketBar]:
    if isinstance(paths, (str, bytes)) or not isinstance(paths, Sequence):
        paths = [paths]
    bars = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != HEADER:
                raise IngestError(f"{path}:1: expected header {','.join(HEADER)}, got {header!r}")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(HEADER):
                    raise IngestError(f"{path}:{lineno}: expected {len(HEADER)} fields, got {len(row)}")
                try:
                    ts, und, opt, k, exp = _parse_time(row[0]), float(row[1]), float(row[2]), float(row[3]), _parse_time(row[4])
                except ValueError as e:
                    raise IngestError(f"{path}:{lineno}: {e}") from None
                for name, v in (("underlying_close", und), ("option_close", opt), ("strike", k)):
                    if not (math.isfinite(v) and v > 0):
                        raise IngestError(f"{path}:{lineno}: {name} must be a positive number, got {v}")
                if exp < ts:
                    raise IngestError(f"{path}:{lineno}: expiry {row[4]} precedes timestamp {row[0]}")
                bars.append(MarketBar(ts, und, opt, k, exp))
    return bars


def bars_to_samples(bars, params: MarketParams, day_count: float = 365) -> tuple[SampleSet, np.ndarray, int]:
    """Convert bars to samples; bars with ``tau > 1`` are dropped.

    Returns ``(samples, timestamps, n_dropped)`` with ``timestamps`` in POSIX
    seconds, aligned with the samples.
    """
    if not day_count > 0:
        raise ValueError("day_count must be positive")
    year = day_count * 86400.0
    s, tau, price, stamps = [], [], [], []
    dropped = 0
    for bar in bars:
        t = (bar.expiry - bar.timestamp).total_seconds() / year
        if t > 1.0:
            dropped += 1
            continue
        s.append(bar.underlying_close / bar.strike)
        tau.append(min(max(t, 0.0), 1.0))
        price.append(bar.option_close / bar.strike)
        stamps.append(bar.timestamp.timestamp())
    s_arr, tau_arr, price_arr = np.array(s, dtype=float), np.array(tau, dtype=float), np.array(price, dtype=float)
    iv = intrinsic_normalized(s_arr, tau_arr, params) if len(s) else np.empty(0)
    return SampleSet(s_arr, tau_arr, price_arr, price_arr - iv), np.array(stamps, dtype=float), dropped


def split_samples(samples: SampleSet, timestamps, split: SplitSpec, seed: int | None = None) -> tuple[SampleSet, SampleSet]:
    """Train/eval split.

    ``random`` takes ``floor(fraction * n)`` training rows from a seeded
    permutation (``split.seed`` wins over ``seed``); ``chronological`` sorts
    by timestamp (stable) and takes the first ``floor(fraction * n)``.
    """
    n = len(samples)
    n_train = int(math.floor(split.fraction * n))
    if split.kind == "random":
        use = split.seed if split.seed is not None else seed
        if use is None:
            raise ValueError("random split needs a seed")
        order = rng.permutation(rng.stream(use), n)
    elif split.kind == "chronological":
        order = np.argsort(np.asarray(timestamps, dtype=float), kind="stable")
    else:
        raise ValueError(f"unknown split kind {split.kind!r}")
    return samples[order[:n_train]], samples[order[n_train:]]


class IngestResult(NamedTuple):
    train: SampleSet
    eval: SampleSet
    dropped: int


def ingest_market_csv(paths, r: float, q: float, day_count: float = 365, split="random:0.8:0") -> IngestResult:
    """Read bars, convert to samples and split them.

    ``r`` and ``q`` only enter through the intrinsic value used for the
    time-value target.
    """
    spec = parse_split(split) if isinstance(split, str) else split
    params = MarketParams(r=r, q=q)
    samples, stamps, dropped = bars_to_samples(read_market_bars(paths), params, day_count)
    train, ev = split_samples(samples, stamps, spec)
    return IngestResult(train, ev, dropped)
