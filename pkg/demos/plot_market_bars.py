"""
From minute bars to training samples
====================================

Real option data arrives as minute bars. Each bar becomes one sample with
s = S/K, tau from the wall-clock time to expiry, and the time value
obtained by subtracting the intrinsic value at the configured rates.
"""

import tempfile
from pathlib import Path

from tvnet.marketdata import ingest_market_csv

rows = [
    "timestamp_utc,underlying_close,option_close,strike,expiry_utc",
    "2021-03-01T14:30:00Z,3900.5,95.2,3850,2021-03-19T21:00:00Z",
    "2021-03-01T14:31:00Z,3901.0,95.6,3850,2021-03-19T21:00:00Z",
    "2021-03-02T15:00:00Z,3870.2,22.4,3950,2021-04-16T20:00:00Z",
    "2021-03-03T16:00:00Z,3820.0,140.0,3700,2021-03-19T21:00:00Z",
    "2021-03-04T16:00:00Z,3790.0,9.1,4000,2022-06-17T20:00:00Z",
]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "bars.csv"
    path.write_text("\n".join(rows) + "\n")
    result = ingest_market_csv([path], r=0.001, q=0.015, day_count=365, split="chronological:0.5")

print(f"dropped {result.dropped} bar(s) more than a year from expiry")
for name, part in (("train", result.train), ("test", result.eval)):
    print(name)
    for sample in part:
        print(f"  s={sample.s:.4f} tau={sample.tau:.4f} C/K={sample.target_price:.5f} V/K={sample.target_timevalue:.5f}")
