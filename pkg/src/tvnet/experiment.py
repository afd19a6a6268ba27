"""Paired price-model / time-value-model training trials and studies.

A trial trains one network on ``C/K`` (model ``price``) and one on ``V/K``
(model ``timevalue``) on the same data with the same shuffle orders, and
records each model's MSE on every dataset role after every epoch. A study
averages trials: the mean and standard deviation are taken over MSE, not
over log-MSE.

Seeding: trial ``i`` uses ``trial_seed = base_seed + i``. Model ``m``
(0 = price, 1 = timevalue) is initialized from
``derive_seed(trial_seed, 1, m)``; epoch ``e`` is shuffled with
``derive_seed(trial_seed, 2, e)`` for both models; random real-data splits
without a fixed seed use ``derive_seed(trial_seed, 3)``.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterable

import numpy as np

from . import neural, rng
from .market_sim import SampleSet, SimConfig, build_dataset, build_expiry_test_set, build_tail_test_set
from .marketdata import bars_to_samples, parse_split, read_market_bars, split_samples
from .pricing import MarketParams

__all__ = [
    "ExperimentConfig",
    "TrialResult",
    "StudyResult",
    "MODELS",
    "prepare_data",
    "run_trial",
    "run_study",
    "aggregate",
    "emit_curves",
]

MODELS = ("price", "timevalue")
PRICE_SPACE_MODEL = "timevalue_as_price"
ROLE_ORDER = ("train", "validation", "tail_0.5", "tail_2.0", "expiry", "test")
CURVE_HEADER = ["epoch", "model", "role", "mse", "log10_mse", "stddev"]


def tail_role(ratio: float) -> str:
    return f"tail_{float(ratio)!r}"


@dataclass(frozen=True)
class ExperimentConfig:
    activation: str = "sigmoid"
    k: int = 4
    epochs: int = 100
    batch_size: int = 128
    n_trials: int = 1000
    base_seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init_scheme: str = "glorot_uniform"
    models: tuple = MODELS
    price_space: bool = False
    # simulated market
    data_seed: int = 0
    s0: float = 100.0
    mu: float = 0.1
    sigma: float = 0.2
    r: float = 0.02
    q: float = 0.0
    tail_ratios: tuple = (0.5, 2.0)
    tail_series: int = 10
    expiry_n: int = 50000
    # real market data; simulated when empty
    market_csv: tuple = ()
    daycount: float = 365.0
    split: str = "random:0.8"

    def __post_init__(self):
        if self.epochs < 1 or self.n_trials < 1:
            raise ValueError("epochs and n_trials must be at least 1")
        if self.k < 1 or self.batch_size < 1:
            raise ValueError("k and batch_size must be at least 1")
        if not self.models or any(m not in MODELS for m in self.models):
            raise ValueError(f"models must be a non-empty subset of {MODELS}")
        neural.get_activation(self.activation)
        parse_split(self.split)

    @property
    def market(self) -> MarketParams:
        return MarketParams(r=self.r, q=self.q, sigma=self.sigma, mu=self.mu)

    @property
    def sim(self) -> SimConfig:
        return SimConfig(s0=self.s0, params=self.market, seed=self.data_seed)

    @property
    def simulated(self) -> bool:
        return not self.market_csv

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment.

        Keyword overrides win over the file.
        """
        kinds = {f.name: f.default for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
            key, val = (x.strip() for x in line.split("=", 1))
            if key not in kinds:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            try:
                values[key] = _coerce(kinds[key], val, key)
            except ValueError as e:
                raise ValueError(f"config line {lineno}: {e}") from None
        values.update(overrides)
        return cls(**values)


def _coerce(default, text: str, key: str):
    if isinstance(default, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{key}: expected true/false, got {text!r}")
    if isinstance(default, tuple):
        items = [x.strip() for x in text.split(",") if x.strip()]
        if key == "tail_ratios":
            return tuple(float(x) for x in items)
        return tuple(items)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


@dataclass
class TrialResult:
    trial_index: int
    curves: dict  # (model, role) -> per-epoch MSE array
    params: dict = field(default_factory=dict)  # model -> final MlpParams

    @property
    def epochs(self) -> int:
        return len(next(iter(self.curves.values())))

    def final(self, model: str, role: str) -> float:
        return float(self.curves[(model, role)][-1])


def _ordered_keys(keys: Iterable) -> list:
    model_rank = {m: i for i, m in enumerate((*MODELS, PRICE_SPACE_MODEL))}

    def rank(key):
        model, role = key
        r = ROLE_ORDER.index(role) if role in ROLE_ORDER else len(ROLE_ORDER)
        return (model_rank.get(model, len(model_rank)), r, role)

    return sorted(keys, key=rank)


# ---------------------------------------------------------------------------
# data


def _simulated_data(config: ExperimentConfig) -> dict:
    sim = config.sim
    data = {"train": build_dataset(sim, "train"), "validation": build_dataset(sim, "validation")}
    for ratio in config.tail_ratios:
        data[tail_role(ratio)] = build_tail_test_set(sim, (ratio,), config.tail_series)
    data["expiry"] = build_expiry_test_set(config.expiry_n, config.data_seed)
    return data


@dataclass
class _RealData:
    samples: SampleSet
    stamps: np.ndarray


def _load_real(config: ExperimentConfig) -> _RealData:
    samples, stamps, _ = bars_to_samples(read_market_bars(list(config.market_csv)), config.market, config.daycount)
    return _RealData(samples, stamps)


def prepare_data(config: ExperimentConfig, trial_index: int = 0, cache=None) -> dict:
    """Role -> SampleSet for one trial.

    Simulated data does not depend on the trial. Real data is re-split per
    trial when the random split has no fixed seed. ``cache`` is whatever a
    previous call for the same config returned via :func:`load_source`.
    """
    if config.simulated:
        return cache if cache is not None else _simulated_data(config)
    real = cache if cache is not None else _load_real(config)
    spec = parse_split(config.split)
    train, held = split_samples(real.samples, real.stamps, spec, seed=rng.derive_seed(config.base_seed + trial_index, 3))
    return {"train": train, ("validation" if spec.kind == "random" else "test"): held}


def load_source(config: ExperimentConfig):
    return _simulated_data(config) if config.simulated else _load_real(config)


# ---------------------------------------------------------------------------
# trials


def run_trial(config: ExperimentConfig, trial_index: int = 0, data=None, source=None) -> TrialResult:
    """Train both models for ``config.epochs`` epochs on identical data.

    ``data`` (role -> SampleSet) skips data preparation; otherwise it is
    built from ``source`` (see :func:`load_source`) or from scratch.
    """
    if data is None:
        data = prepare_data(config, trial_index, source)
    if "train" not in data or len(data["train"]) == 0:
        raise ValueError("trial needs a non-empty 'train' dataset")
    act = neural.get_activation(config.activation)
    trial_seed = config.base_seed + trial_index
    shuffle_seeds = [rng.derive_seed(trial_seed, 2, e) for e in range(config.epochs)]
    roles = [r for r in ROLE_ORDER if r in data] + sorted(r for r in data if r not in ROLE_ORDER)
    curves: dict = {}
    final_params: dict = {}
    for model in config.models:
        mi = MODELS.index(model)
        params = neural.init_params(config.k, rng.derive_seed(trial_seed, 1, mi), config.init_scheme)
        state = neural.AdamState.for_params(params, lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2, eps=config.epsilon)
        hist = {role: np.empty(config.epochs) for role in roles}
        price_hist = {role: np.empty(config.epochs) for role in roles}
        for e in range(config.epochs):
            params, state, _ = neural.train_epoch(params, state, act, data["train"], config.batch_size, shuffle_seeds[e], model)
            for role in roles:
                ds = data[role]
                pred = neural.forward(params, act, ds.s, ds.tau)
                hist[role][e] = neural.mse(pred, ds.targets(model))
                if model == "timevalue" and config.price_space:
                    price_hist[role][e] = neural.mse(pred + (ds.price - ds.timevalue), ds.price)
        for role in roles:
            curves[(model, role)] = hist[role]
            if model == "timevalue" and config.price_space:
                curves[(PRICE_SPACE_MODEL, role)] = price_hist[role]
        final_params[model] = params
    return TrialResult(trial_index, {k: curves[k] for k in _ordered_keys(curves)}, final_params)


# ---------------------------------------------------------------------------
# studies


@dataclass
class StudyResult:
    config_text: str
    n_trials: int
    mean: dict  # (model, role) -> array
    std: dict
    trials: list = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(next(iter(self.mean.values())))

    def log10_mean(self, model: str, role: str) -> np.ndarray:
        return np.log10(self.mean[(model, role)])

    def to_json(self, path) -> None:
        payload = {
            "config": self.config_text,
            "n_trials": self.n_trials,
            "curves": [
                {"model": m, "role": r, "mean": self.mean[(m, r)].tolist(), "std": self.std[(m, r)].tolist()}
                for (m, r) in self.mean
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "StudyResult":
        with open(path) as fh:
            payload = json.load(fh)
        mean, std = {}, {}
        for c in payload["curves"]:
            mean[(c["model"], c["role"])] = np.array(c["mean"], dtype=float)
            std[(c["model"], c["role"])] = np.array(c["std"], dtype=float)
        return cls(payload["config"], int(payload["n_trials"]), mean, std)


def aggregate(results, config_text: str = "", keep_trials: bool = False) -> StudyResult:
    """Mean and population standard deviation of MSE per epoch.

    Results are reduced in trial-index order, so the output does not depend
    on the order in which trials finished.
    """
    results = sorted(results, key=lambda r: r.trial_index)
    if not results:
        raise ValueError("cannot aggregate zero trials")
    keys = list(results[0].curves)
    mean, std = {}, {}
    for key in keys:
        stack = np.stack([r.curves[key] for r in results])
        mean[key] = stack.mean(axis=0)
        std[key] = stack.std(axis=0)
    return StudyResult(config_text, len(results), mean, std, results if keep_trials else [])


_WORKER_SOURCE = None


def _init_worker(config):
    global _WORKER_SOURCE
    _WORKER_SOURCE = load_source(config)


def _trial_worker(args):
    config, index = args
    return run_trial(config, index, source=_WORKER_SOURCE)


def run_study(config: ExperimentConfig, jobs: int = 1, keep_trials: bool = False, source=None) -> StudyResult:
    """Run ``config.n_trials`` trials, in a process pool when ``jobs > 1``."""
    indices = range(config.n_trials)
    if jobs is None or jobs < 1:
        jobs = os.cpu_count() or 1
    if jobs == 1:
        source = source if source is not None else load_source(config)
        results = [run_trial(config, i, source=source) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(config,)) as pool:
            results = list(pool.map(_trial_worker, [(config, i) for i in indices]))
    return aggregate(results, config.to_text(), keep_trials)


def emit_curves(study: StudyResult, path) -> None:
    """Write ``epoch,model,role,mse,log10_mse,stddev`` rows, epoch-major."""
    if not study.mean:
        raise ValueError("study has no curves")
    keys = _ordered_keys(study.mean)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for e in range(study.epochs):
            for model, role in keys:
                m = float(study.mean[(model, role)][e])
                lg = math.log10(m) if m > 0 else -math.inf
                w.writerow([e + 1, model, role, repr(m), repr(lg), repr(float(study.std[(model, role)][e]))])
