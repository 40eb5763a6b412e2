"""Deterministic demo datasets that write plot-ready CSV.

``ohlc``
    Hourly synthetic temperatures with a reset at midnight UTC. Columns:
    ``timestamp, temperature, reset, open, high, low, close``.
``online-regression``
    The non-stationary regression run. Columns: ``step, loss, regret,
    w_hat_1..w_hat_d, w_star_1..w_star_d, reward``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import Sequence, rng
from .csvio import format_float, format_timestamp
from .learnloop import nonstationary_regression_experiment
from .modules import trailing_ohlc

HOUR_NS = 3_600_000_000_000
START_NS = 1_609_459_200_000_000_000  # 2021-01-01T00:00:00Z


def synthetic_temperatures(seed: int, days: int = 7):
    """Hourly temperatures: a daily sine cycle plus seeded Gaussian noise."""
    hours = np.arange(24 * days)
    cycle = 10.0 + 6.0 * np.sin(2 * np.pi * (hours - 9) / 24.0)
    temps = cycle + rng(seed).normal(0.0, 1.5, size=hours.size)
    timestamps = START_NS + hours.astype(np.int64) * HOUR_NS
    resets = hours % 24 == 0
    return timestamps, temps, resets


def ohlc_demo(seed: int, path, days: int = 7) -> np.ndarray:
    timestamps, temps, resets = synthetic_temperatures(seed, days)
    ohlc = trailing_ohlc(Sequence.from_values(temps, timestamps), resets).values()
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "temperature", "reset", "open", "high", "low", "close"])
        for ts, temp, reset, row in zip(timestamps, temps, resets, ohlc):
            writer.writerow([format_timestamp(ts, True), format_float(temp), int(reset),
                             *map(format_float, row)])
    return ohlc


def online_regression_demo(seed: int, path, **kwargs):
    record = nonstationary_regression_experiment(seed, **kwargs)
    record.to_csv(path)
    return record


DEMOS = {"ohlc": ohlc_demo, "online-regression": online_regression_demo}
