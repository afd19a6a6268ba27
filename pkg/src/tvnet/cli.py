"""Command-line front end: ``python -m tvnet <command> ...``.

Every command writes into an output directory (``--out``, default
``out/<command>-<hash of the resolved config>``) holding ``config.txt``
with all defaults expanded, plus the command's own files.

Exit codes: 0 success, 1 usage or input error, 2 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from . import experiment, verify
from .experiment import ExperimentConfig, StudyResult, emit_curves, run_study, run_trial
from .market_sim import QUARTER_CONVENTION, SimConfig, build_dataset, build_expiry_test_set, build_tail_test_set
from .marketdata import ingest_market_csv, parse_split
from .pricing import MarketParams

CHECKS = ("mills", "integrability", "lemma3", "tailprobe", "uatsweep")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_model_flags(p, study: bool):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--model", choices=("price", "timevalue", "both"), default=None)
    p.add_argument("--activation", default=None)
    p.add_argument("--k", type=int, default=None, help="hidden units")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None, help="batch size")
    p.add_argument("--lr", type=float, default=None, help="Adam learning rate")
    p.add_argument("--seed", type=int, default=None, help="base seed (trial i uses seed + i)")
    p.add_argument("--data-seed", type=int, default=None, help="simulated-data seed (default: --seed)")
    p.add_argument("--input", action="append", default=None, help="market-bar CSV (repeatable); simulated data when absent")
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--daycount", type=float, default=None)
    p.add_argument("--split", default=None, help="random:<fraction>[:<seed>] or chronological:<fraction>")
    p.add_argument("--price-space", action="store_true", default=None, help="also record the time-value model's MSE in price space")
    if study:
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: logical cores)")
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tvnet", description="Option pricing networks trained on Black-Scholes time values.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="write the simulated datasets as CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--r", type=float, default=0.02)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--expiry-n", type=int, default=50000)
    p.add_argument("--tail-series", type=int, default=10)
    p.add_argument("--out", default=None)

    _add_model_flags(sub.add_parser("train", help="one paired trial; curves and final parameters"), study=False)
    _add_model_flags(sub.add_parser("study", help="averaged multi-trial curves"), study=True)

    p = sub.add_parser("ingest", help="convert market-bar CSVs to split sample CSVs")
    p.add_argument("--input", action="append", required=True)
    p.add_argument("--schema", choices=("marketbar",), default="marketbar")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--daycount", type=float, default=365.0)
    p.add_argument("--split", default="random:0.8:0")
    p.add_argument("--out", default=None)

    p = sub.add_parser("verify", help="numerical checks of the analytic bounds")
    p.add_argument("--check", choices=CHECKS, action="append", required=True)
    p.add_argument("--s-max-exponent", type=int, default=7, help="integrability: last dyadic shell")
    p.add_argument("--epochs", type=int, default=100, help="tailprobe: training epochs")
    p.add_argument("--seed", type=int, default=0, help="tailprobe/uatsweep seed")
    p.add_argument("--activation", default="sigmoid", help="tailprobe activation")
    p.add_argument("--seeds", type=int, default=5, help="uatsweep seeds")
    p.add_argument("--out", default=None)

    p = sub.add_parser("emit", help="write curves.csv from a saved study")
    p.add_argument("--study", required=True, help="study.json or the directory holding it")
    p.add_argument("--out", required=True, help="curve CSV path")
    return parser


def _run_dir(args, command: str, config_text: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path("out") / f"{command}-{hashlib.sha256(config_text.encode()).hexdigest()[:12]}"
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config_text)
    return out


def _kv(**items) -> str:
    return "".join(f"{k} = {v}\n" for k, v in items.items())


def experiment_config(args) -> ExperimentConfig:
    text = Path(args.config).read_text() if args.config else ""
    overrides = {}
    flag_map = {
        "activation": "activation",
        "k": "k",
        "epochs": "epochs",
        "batch": "batch_size",
        "lr": "learning_rate",
        "seed": "base_seed",
        "data_seed": "data_seed",
        "r": "r",
        "q": "q",
        "daycount": "daycount",
        "split": "split",
        "price_space": "price_space",
        "trials": "n_trials",
    }
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = v
    if args.model is not None:
        overrides["models"] = experiment.MODELS if args.model == "both" else (args.model,)
    if args.input:
        overrides["market_csv"] = tuple(args.input)
    file_keys = {ln.split("#", 1)[0].split("=", 1)[0].strip() for ln in text.splitlines() if "=" in ln.split("#", 1)[0]}
    if args.seed is not None and args.data_seed is None and "data_seed" not in file_keys:
        overrides["data_seed"] = args.seed
    if args.command == "train":
        overrides["n_trials"] = 1
    return ExperimentConfig.from_text(text, **overrides)


def cmd_simulate(args) -> int:
    sim = SimConfig(s0=args.s0, params=MarketParams(r=args.r, q=args.q, sigma=args.sigma, mu=args.mu), seed=args.seed)
    text = _kv(seed=args.seed, s0=repr(args.s0), mu=repr(args.mu), sigma=repr(args.sigma), r=repr(args.r), q=repr(args.q),
               days_per_month=sim.days_per_month, months=sim.months, expiry_n=args.expiry_n, tail_series=args.tail_series,
               tail_ratios="0.5,2.0", quarter_convention=QUARTER_CONVENTION)
    out = _run_dir(args, "simulate", text)
    build_dataset(sim, "train").to_csv(out / "train.csv")
    build_dataset(sim, "validation").to_csv(out / "validation.csv")
    for ratio in (0.5, 2.0):
        build_tail_test_set(sim, (ratio,), args.tail_series).to_csv(out / f"{experiment.tail_role(ratio)}.csv")
    build_expiry_test_set(args.expiry_n, args.seed).to_csv(out / "expiry.csv")
    print(f"wrote datasets to {out}")
    return 0


def cmd_train(args) -> int:
    config = experiment_config(args)
    out = _run_dir(args, "train", config.to_text())
    result = run_trial(config, 0)
    study = experiment.aggregate([result], config.to_text())
    emit_curves(study, out / "curves.csv")
    for model, params in result.params.items():
        params.to_csv(out / f"params_{model}.csv")
    _print_final(study)
    print(f"wrote {out / 'curves.csv'}")
    return 0


def cmd_study(args) -> int:
    config = experiment_config(args)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    # jobs only affects scheduling, so it stays out of config.txt
    out = _run_dir(args, "study", config.to_text())
    study = run_study(config, jobs=jobs)
    study.to_json(out / "study.json")
    emit_curves(study, out / "curves.csv")
    _print_final(study)
    print(f"wrote {out / 'curves.csv'}")
    return 0


def _print_final(study: StudyResult) -> None:
    for (model, role), curve in study.mean.items():
        print(f"  {model:>18s} {role:>10s}  final log10(MSE) {np.log10(curve[-1]):+.3f}")


def cmd_ingest(args) -> int:
    spec = parse_split(args.split)
    if spec.kind == "random" and spec.seed is None:
        raise UsageError("ingest needs a fixed split seed: random:<fraction>:<seed>")
    text = _kv(input=",".join(args.input), schema=args.schema, r=repr(args.r), q=repr(args.q), daycount=repr(args.daycount), split=args.split)
    out = _run_dir(args, "ingest", text)
    res = ingest_market_csv(args.input, args.r, args.q, args.daycount, spec)
    eval_name = "validation" if spec.kind == "random" else "test"
    res.train.to_csv(out / "train.csv")
    res.eval.to_csv(out / f"{eval_name}.csv")
    summary = _kv(train=len(res.train), **{eval_name: len(res.eval)}, dropped_tau_gt_1=res.dropped)
    (out / "summary.txt").write_text(summary)
    print(f"train {len(res.train)}, {eval_name} {len(res.eval)}, dropped {res.dropped} (tau > 1); wrote {out}")
    return 0


def cmd_verify(args) -> int:
    checks = list(dict.fromkeys(args.check))
    text = _kv(checks=",".join(checks), s_max_exponent=args.s_max_exponent, epochs=args.epochs, seed=args.seed,
               activation=args.activation, seeds=args.seeds)
    out = _run_dir(args, "verify", text)
    reports = out / "reports"
    reports.mkdir(exist_ok=True)
    failed = False
    for check in checks:
        ok, summary, rows = _run_check(check, args)
        (reports / f"{check}.txt").write_text(summary + "\n")
        with open(reports / f"{check}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(verify.REPORT_HEADER)
            w.writerows(rows)
        print(summary)
        failed |= not ok
    return 2 if failed else 0


def _run_check(check: str, args):
    if check == "mills":
        r = verify.check_mills_bound()
        return r.passed, r.summary(), list(r.rows())
    if check == "lemma3":
        reps = [verify.check_sigmoid_difference_bound(c) for c in verify.DEFAULT_RIDGE_CONSTANTS]
        return all(r.passed for r in reps), "\n".join(r.summary() for r in reps), [row for r in reps for row in r.rows()]
    if check == "integrability":
        reps = verify.check_timevalue_integrability(s_max_exponent=args.s_max_exponent)
        return all(r.passed for r in reps), "\n".join(r.summary() for r in reps), [row for r in reps for row in r.rows()]
    if check == "tailprobe":
        config = ExperimentConfig(activation=args.activation, epochs=args.epochs, n_trials=1, base_seed=args.seed, data_seed=args.seed)
        trial = run_trial(config, 0)
        probe = verify.tail_generalization_probe(trial.params["price"], trial.params["timevalue"], args.activation, config.market)
        pe, te = probe.at(10.0, 1.0)
        f10 = float(probe.f[np.argmin((probe.s - 10) ** 2 + (probe.tau - 1) ** 2)])
        summary = (
            f"tailprobe (one trial, {args.activation}, {args.epochs} epochs): at s=10, tau=1 f={f10:.4f}\n"
            f"  price-model error {pe:.4f} (net bound sum|alpha|*sup|h| = {probe.price_net_bound:.4f})\n"
            f"  time-value-model price error {te:.4f}\n"
            f"  max over grid: price {probe.price_error.max():.4f}, time value {probe.timevalue_error.max():.4f}"
        )
        return True, summary, list(probe.rows())
    if check == "uatsweep":
        sw = verify.empirical_uat_sweep(n_seeds=args.seeds)
        return sw.nonincreasing(), sw.summary(), list(sw.rows())
    raise UsageError(f"unknown check {check!r}")


def cmd_emit(args) -> int:
    path = Path(args.study)
    if path.is_dir():
        path = path / "study.json"
    study = StudyResult.from_json(path)
    emit_curves(study, args.out)
    print(f"wrote {args.out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "study": cmd_study,
    "ingest": cmd_ingest,
    "verify": cmd_verify,
    "emit": cmd_emit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "tvnet: error: a command is required")
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"tvnet {getattr(args, 'command', '')}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
