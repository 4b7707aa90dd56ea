"""Writes the bundled synthetic datasets under data/."""

import argparse
from pathlib import Path

import numpy as np
import pandas as pd


def synthetic_btc(days: int, seed: int) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    t = np.arange(days, dtype=float)
    seasonal = (
        10.0 * np.sin(2 * np.pi * t / 30.0)
        + 15.0 * np.sin(2 * np.pi * t / 120.0 + 1.0)
        + 20.0 * np.sin(2 * np.pi * t / 365.0 + 2.0)
    )
    level = 200.0 + 0.01 * t + seasonal
    price = level + rng.normal(0.0, 2.0, days)

    # On-chain series loosely follow the price level with their own noise.
    hashrate = 50.0 + 0.2 * level + rng.normal(0.0, 1.0, days)
    difficulty = 1.0e3 + 3.0 * np.convolve(level, np.ones(14) / 14.0, mode="same") + rng.normal(0.0, 5.0, days)
    transactions = 3.0e5 + 500.0 * seasonal + rng.normal(0.0, 4.0e3, days)
    median_fee = np.abs(0.5 + 0.01 * seasonal + rng.normal(0.0, 0.05, days))

    dates = pd.date_range("2018-01-01", periods=days, freq="D")
    return pd.DataFrame(
        {
            "date": dates.strftime("%Y-%m-%d"),
            "price": price,
            "hashrate": hashrate,
            "difficulty": difficulty,
            "transactions": transactions,
            "median_fee": median_fee,
        }
    )


# Short names of the twenty selected on-chain and indicator features.
TABLE_NAMES = [
    "MTF30", "MTF7", "P90EMA", "S90", "Tran", "P30w", "P3w", "P7", "MTF7R", "D30R",
    "MP", "P30S", "S90E", "TVU", "T100C", "D90M", "H90V", "P90W", "S90S", "MTF",
]


def sample_hashrate(rows: int, seed: int) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    t = np.arange(rows, dtype=float)
    base = 8000.0 + 40.0 * t + rng.normal(0.0, 150.0, rows)
    frame = {"date": pd.date_range("2019-01-01", periods=rows, freq="D").strftime("%Y-%m-%d")}
    for i, name in enumerate(TABLE_NAMES):
        frame[name] = (i + 1) * 100.0 + 0.01 * base * (i % 3) + rng.normal(0.0, 10.0, rows)
    out = pd.DataFrame(frame)
    # A few holes to exercise interpolation.
    out.loc[[5, 17, 42], "Tran"] = np.nan
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    parser.add_argument("--seed", type=int, default=20240501)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    synthetic_btc(1000, args.seed).to_csv(args.out / "synthetic_btc.csv", index=False, float_format="%.6f")
    sample_hashrate(100, args.seed + 1).to_csv(args.out / "sample_hashrate.csv", index=False, float_format="%.6f")


if __name__ == "__main__":
    main()
