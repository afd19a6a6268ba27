import csv
import math

import numpy as np
import pytest

from tvnet import neural
from tvnet.experiment import (
    PRICE_SPACE_MODEL,
    ExperimentConfig,
    StudyResult,
    TrialResult,
    aggregate,
    emit_curves,
    load_source,
    prepare_data,
    run_study,
    run_trial,
)
from tvnet.market_sim import SampleSet, SimConfig, build_dataset
from tvnet.pricing import MarketParams

SMALL = dict(epochs=2, n_trials=3, tail_series=1, expiry_n=200, base_seed=5)


def toy_data(n=300, seed=0):
    g = np.random.default_rng(seed)
    s = g.uniform(0.8, 1.25, n)
    tau = g.uniform(0.0, 1.0, n)
    return {
        "train": SampleSet.from_quotes(s, tau, MarketParams()),
        "validation": SampleSet.from_quotes(s[::-1].copy(), tau, MarketParams()),
    }


@pytest.fixture(scope="module")
def small_source():
    return load_source(ExperimentConfig(**SMALL))


class TestConfig:
    def test_text_round_trip(self):
        cfg = ExperimentConfig(activation="tanh", k=6, tail_ratios=(0.5, 3.0), price_space=True, market_csv=("a.csv", "b.csv"))
        assert ExperimentConfig.from_text(cfg.to_text()) == cfg

    def test_every_field_logged(self):
        text = ExperimentConfig().to_text()
        for key in ("activation", "learning_rate", "beta2", "init_scheme", "data_seed", "split", "daycount"):
            assert f"\n{key} = " in "\n" + text

    def test_overrides_win(self):
        cfg = ExperimentConfig.from_text("epochs = 7\nk = 3  # comment\n", epochs=9)
        assert cfg.epochs == 9 and cfg.k == 3

    @pytest.mark.parametrize(
        "text,match",
        [
            ("bogus = 1", "unknown key 'bogus'"),
            ("epochs 3", "expected 'key = value'"),
            ("epochs = three", "line 1"),
            ("price_space = maybe", "true/false"),
        ],
    )
    def test_parse_errors(self, text, match):
        with pytest.raises(ValueError, match=match):
            ExperimentConfig.from_text(text)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(epochs=0), dict(n_trials=0), dict(k=0), dict(models=("call",)), dict(activation="gelu"), dict(split="half")],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ExperimentConfig(**kwargs)


class TestRunTrial:
    def test_zero_learning_rate_reports_initial_mse(self):
        cfg = ExperimentConfig(epochs=1, learning_rate=0.0, base_seed=3)
        data = toy_data()
        res = run_trial(cfg, 2, data=data)
        from tvnet import rng

        for mi, model in enumerate(("price", "timevalue")):
            p0 = neural.init_params(4, rng.derive_seed(5, 1, mi))
            expected = neural.mse(neural.forward(p0, "sigmoid", data["train"].s, data["train"].tau), data["train"].targets(model))
            assert res.final(model, "train") == pytest.approx(expected, rel=1e-14)

    def test_repeatable(self):
        cfg = ExperimentConfig(epochs=3)
        data = toy_data()
        a, b = run_trial(cfg, 1, data=data), run_trial(cfg, 1, data=data)
        assert a.curves.keys() == b.curves.keys()
        for key in a.curves:
            assert np.array_equal(a.curves[key], b.curves[key])

    def test_trials_differ(self):
        cfg = ExperimentConfig(epochs=2)
        data = toy_data()
        assert run_trial(cfg, 0, data=data).final("price", "train") != run_trial(cfg, 1, data=data).final("price", "train")

    def test_curve_shapes_and_roles(self, small_source):
        res = run_trial(ExperimentConfig(**SMALL), 0, source=small_source)
        assert res.epochs == 2
        roles = [r for (m, r) in res.curves if m == "price"]
        assert roles == ["train", "validation", "tail_0.5", "tail_2.0", "expiry"]
        assert all(np.all(c >= 0) for c in res.curves.values())

    def test_models_independent(self):
        """Each model's curves do not depend on whether the other one is trained."""
        data = toy_data()
        both = run_trial(ExperimentConfig(epochs=2), 0, data=data)
        alone = run_trial(ExperimentConfig(epochs=2, models=("timevalue",)), 0, data=data)
        assert np.array_equal(both.curves[("timevalue", "validation")], alone.curves[("timevalue", "validation")])

    def test_price_space_output(self):
        data = toy_data()
        res = run_trial(ExperimentConfig(epochs=2, price_space=True), 0, data=data)
        ps = res.curves[(PRICE_SPACE_MODEL, "validation")]
        own = res.curves[("timevalue", "validation")]
        # adding back the intrinsic value is exact up to rounding
        np.testing.assert_allclose(ps, own, rtol=1e-9)

    def test_empty_train_rejected(self):
        with pytest.raises(ValueError):
            run_trial(ExperimentConfig(epochs=1), 0, data={"train": SampleSet.empty()})

    def test_golden_default_trial(self, fixtures_dir):
        cfg = ExperimentConfig(n_trials=1)
        res = run_trial(cfg, 0)
        golden = {}
        with open(fixtures_dir / "trial0_default_final.csv") as fh:
            for row in csv.DictReader(fh):
                golden[(row["model"], row["role"])] = float(row["mse"])
        assert set(golden) == set(res.curves)
        for key, value in golden.items():
            assert res.final(*key) == pytest.approx(value, rel=1e-9)


class TestStudy:
    def test_single_trial_mean(self):
        data = toy_data()
        cfg = ExperimentConfig(epochs=2, n_trials=1)
        trial = run_trial(cfg, 0, data=data)
        study = aggregate([trial])
        for key in trial.curves:
            assert np.array_equal(study.mean[key], trial.curves[key])
            assert np.all(study.std[key] == 0)

    def test_permutation_invariance(self):
        data = toy_data()
        cfg = ExperimentConfig(epochs=2)
        trials = [run_trial(cfg, i, data=data) for i in range(4)]
        a = aggregate(trials)
        b = aggregate(trials[::-1])
        c = aggregate([trials[2], trials[0], trials[3], trials[1]])
        for key in a.mean:
            assert np.array_equal(a.mean[key], b.mean[key]) and np.array_equal(a.mean[key], c.mean[key])
            assert np.array_equal(a.std[key], c.std[key])

    def test_mean_and_population_std(self):
        curves = [np.array([1.0, 2.0]), np.array([3.0, 6.0])]
        trials = [TrialResult(i, {("price", "train"): c}) for i, c in enumerate(curves)]
        st = aggregate(trials)
        np.testing.assert_array_equal(st.mean[("price", "train")], [2.0, 4.0])
        np.testing.assert_array_equal(st.std[("price", "train")], [1.0, 2.0])

    def test_seeds_are_base_plus_index(self, small_source):
        cfg = ExperimentConfig(**SMALL)
        study = run_study(cfg, keep_trials=True, source=small_source)
        shifted = run_trial(ExperimentConfig(**{**SMALL, "base_seed": 7}), 0, source=small_source)
        assert np.array_equal(study.trials[2].curves[("price", "train")], shifted.curves[("price", "train")])

    def test_jobs_do_not_change_output(self, small_source, tmp_path):
        cfg = ExperimentConfig(**SMALL)
        emit_curves(run_study(cfg, jobs=1, source=small_source), tmp_path / "a.csv")
        emit_curves(run_study(cfg, jobs=2), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_json_round_trip(self, tmp_path):
        st = aggregate([run_trial(ExperimentConfig(epochs=2), 0, data=toy_data())], "k = 4\n")
        st.to_json(tmp_path / "s.json")
        back = StudyResult.from_json(tmp_path / "s.json")
        assert back.config_text == "k = 4\n" and back.n_trials == 1
        for key in st.mean:
            assert np.array_equal(back.mean[key], st.mean[key])


class TestEmit:
    def test_single_row(self, tmp_path):
        st = aggregate([TrialResult(0, {("price", "train"): np.array([0.01])})])
        emit_curves(st, tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "epoch,model,role,mse,log10_mse,stddev"
        assert len(lines) == 2

    def test_log_column_and_order(self, tmp_path):
        data = toy_data()
        st = aggregate([run_trial(ExperimentConfig(epochs=3), i, data=data) for i in range(2)])
        emit_curves(st, tmp_path / "c.csv")
        with open(tmp_path / "c.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3 * 2 * 2
        for row in rows:
            assert float(row["log10_mse"]) == pytest.approx(math.log10(float(row["mse"])), rel=1e-15)
        keys = [(int(r["epoch"]), r["model"], r["role"]) for r in rows]
        assert keys[:4] == [(1, "price", "train"), (1, "price", "validation"), (1, "timevalue", "train"), (1, "timevalue", "validation")]
        assert [k[0] for k in keys] == sorted(k[0] for k in keys)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_curves(StudyResult("", 0, {}, {}), tmp_path / "c.csv")


class TestRealData:
    def test_prepare_real_random(self, fixtures_dir):
        cfg = ExperimentConfig(market_csv=(str(fixtures_dir / "bars4.csv"),), split="random:0.5")
        d0 = prepare_data(cfg, 0)
        assert set(d0) == {"train", "validation"} and len(d0["train"]) == 2
        assert np.array_equal(prepare_data(cfg, 0)["train"].s, d0["train"].s)

    def test_prepare_real_chronological(self, fixtures_dir):
        cfg = ExperimentConfig(market_csv=(str(fixtures_dir / "bars4.csv"),), split="chronological:0.5")
        assert set(prepare_data(cfg, 0)) == {"train", "test"}
        res = run_trial(ExperimentConfig(market_csv=cfg.market_csv, split=cfg.split, epochs=2), 0)
        assert ("timevalue", "test") in res.curves


def test_simulated_data_shared_across_trials():
    cfg = ExperimentConfig(**SMALL)
    assert np.array_equal(prepare_data(cfg, 0)["train"].s, build_dataset(SimConfig(seed=0), "train").s)
