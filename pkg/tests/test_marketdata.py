import math

import numpy as np
import pytest

from tvnet.marketdata import (
    IngestError,
    SplitSpec,
    bars_to_samples,
    ingest_market_csv,
    parse_split,
    read_market_bars,
    split_samples,
)
from tvnet.pricing import MarketParams

HEADER = "timestamp_utc,underlying_close,option_close,strike,expiry_utc\n"
R = 0.02


def write(tmp_path, body, name="bars.csv", header=HEADER):
    path = tmp_path / name
    path.write_text(header + body)
    return path


class TestFourRowFixture:
    """Hand arithmetic: 18.25, 73 and 120 days on a 365-day year."""

    @pytest.fixture
    def samples(self, fixtures_dir):
        bars = read_market_bars(fixtures_dir / "bars4.csv")
        return bars_to_samples(bars, MarketParams(r=R, q=0.0), 365)

    def test_moneyness_and_price(self, samples):
        s, _, dropped = samples
        assert dropped == 0
        np.testing.assert_allclose(s.s, [1.0, 1.1, 1.5, 0.9], rtol=1e-15)
        np.testing.assert_allclose(s.price, [0.05, 0.105, 0.5, 0.009], rtol=1e-15)

    def test_tau(self, samples):
        s, _, _ = samples
        np.testing.assert_allclose(s.tau, [0.05, 0.2, 0.0, 120 / 365], rtol=1e-14, atol=0)

    def test_time_value(self, samples):
        s, _, _ = samples
        expected = [
            0.05 - (1.0 - math.exp(-R * 0.05)),
            0.105 - (1.1 - math.exp(-R * 0.2)),
            0.0,
            0.009,
        ]
        np.testing.assert_allclose(s.timevalue, expected, rtol=1e-12, atol=1e-17)
        assert s.timevalue[2] == 0.0

    def test_offset_timestamp_read_as_utc(self, samples):
        _, stamps, _ = samples
        assert stamps[3] == stamps[0]

    def test_random_split_sizes(self, fixtures_dir):
        res = ingest_market_csv([fixtures_dir / "bars4.csv"], R, 0.0, split="random:0.8:42")
        assert (len(res.train), len(res.eval)) == (3, 1)
        again = ingest_market_csv([fixtures_dir / "bars4.csv"], R, 0.0, split="random:0.8:42")
        assert np.array_equal(res.train.s, again.train.s)
        assert sorted(np.concatenate([res.train.s, res.eval.s]).tolist()) == pytest.approx([0.9, 1.0, 1.1, 1.5])

    def test_chronological_split(self, fixtures_dir):
        res = ingest_market_csv([fixtures_dir / "bars4.csv"], R, 0.0, split="chronological:0.5")
        # rows 1 and 4 share the earliest instant; stable order keeps file order
        np.testing.assert_allclose(res.train.s, [1.0, 0.9])
        np.testing.assert_allclose(res.eval.s, [1.1, 1.5])


class TestParsing:
    def test_day_count(self, tmp_path):
        p = write(tmp_path, "2021-01-01T00:00:00,100,1,100,2021-01-13T00:00:00\n")
        bars = read_market_bars(p)
        for dc in (365, 360, 252):
            s, _, _ = bars_to_samples(bars, MarketParams(), dc)
            assert s.tau[0] == pytest.approx(12 / dc, rel=1e-15)

    def test_long_dated_dropped(self, tmp_path):
        p = write(
            tmp_path,
            "2021-01-01T00:00:00Z,100,1,100,2021-06-01T00:00:00Z\n"
            "2021-01-01T00:00:00Z,100,9,100,2022-06-01T00:00:00Z\n",
        )
        res = ingest_market_csv([p], R, 0.0, split="random:0.5:1")
        assert res.dropped == 1
        assert len(res.train) + len(res.eval) == 1

    def test_multiple_files(self, tmp_path, fixtures_dir):
        p = write(tmp_path, "2021-01-01T00:00:00Z,100,1,100,2021-06-01T00:00:00Z\n")
        assert len(read_market_bars([fixtures_dir / "bars4.csv", p])) == 5

    @pytest.mark.parametrize(
        "row,match",
        [
            ("2021-01-01T00:00:00Z,100,-1,100,2021-06-01T00:00:00Z", "option_close must be a positive"),
            ("2021-01-01T00:00:00Z,0,1,100,2021-06-01T00:00:00Z", "underlying_close must be a positive"),
            ("2021-01-01T00:00:00Z,100,1,100", "expected 5 fields"),
            ("yesterday,100,1,100,2021-06-01T00:00:00Z", "Invalid isoformat"),
            ("2021-07-01T00:00:00Z,100,1,100,2021-06-01T00:00:00Z", "precedes"),
            ("2021-01-01T00:00:00Z,abc,1,100,2021-06-01T00:00:00Z", "could not convert"),
        ],
    )
    def test_bad_rows_report_line(self, tmp_path, row, match):
        p = write(tmp_path, "2021-01-01T00:00:00Z,100,1,100,2021-06-01T00:00:00Z\n" + row + "\n")
        with pytest.raises(IngestError, match=match) as info:
            read_market_bars(p)
        assert f"{p}:3:" in str(info.value)

    def test_bad_header(self, tmp_path):
        p = write(tmp_path, "", header="time,S,C,K,T\n")
        with pytest.raises(IngestError, match=":1: expected header"):
            read_market_bars(p)


class TestSplit:
    def test_parse(self):
        assert parse_split("random:0.8:42") == SplitSpec("random", 0.8, 42)
        assert parse_split("random:0.8") == SplitSpec("random", 0.8, None)
        assert parse_split("chronological:0.5") == SplitSpec("chronological", 0.5)

    @pytest.mark.parametrize("text", ["random", "random:x", "chronological:0.5:1", "shuffle:0.5", "random:1.0"])
    def test_parse_errors(self, text):
        with pytest.raises(ValueError):
            parse_split(text)

    def test_reference_split_sizes(self, tmp_path):
        rows = "".join(
            f"2021-01-01T00:{i // 60 % 60:02d}:{i % 60:02d}Z,{100 + i % 7},1,100,2021-03-01T00:00:00Z\n"
            for i in range(12323)
        )
        res = ingest_market_csv([write(tmp_path, rows)], R, 0.0, split="random:0.8:7")
        assert (len(res.train), len(res.eval)) == (9858, 2465)

    def test_random_split_needs_seed(self, fixtures_dir):
        s, stamps, _ = bars_to_samples(read_market_bars(fixtures_dir / "bars4.csv"), MarketParams(), 365)
        with pytest.raises(ValueError, match="seed"):
            split_samples(s, stamps, parse_split("random:0.5"))
        train, _ = split_samples(s, stamps, parse_split("random:0.5"), seed=3)
        assert len(train) == 2
