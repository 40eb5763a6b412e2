"""EWMA throughput benchmark with oracle spot checks."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

from . import oracles
from .core import Sequence, rng, split_seed, unroll_columns
from .exceptions import ParameterError, ResourceError
from .modules import EWMA, EwSpec

SPOT_TOLERANCE = 1e-9


def worker_count(limit: int | None = None) -> int:
    """Threads to use: ``STREAMLOOP_THREADS`` caps the CPU count."""
    n = os.cpu_count() or 1
    env = os.environ.get("STREAMLOOP_THREADS")
    if env:
        n = min(n, max(1, int(env)))
    if limit is not None:
        n = min(n, limit)
    return max(1, n)


@dataclass
class BenchReport:
    rows: int
    cols: int
    seconds: float
    checked: int
    mismatches: int
    max_error: float

    @property
    def cells_per_second(self) -> float:
        return self.rows * self.cols / self.seconds if self.seconds > 0 else float("inf")

    @property
    def passed(self) -> bool:
        return self.mismatches == 0

    def summary(self) -> str:
        return (f"rows={self.rows} cols={self.cols} seconds={self.seconds:.3f} "
                f"throughput={self.cells_per_second:.4g} cells/s "
                f"spot-check={self.checked - self.mismatches}/{self.checked} "
                f"max_abs_err={self.max_error:.3g}")


def run_bench(rows: int, cols: int, alpha: float, seed: int = 0, adjust: bool = True,
              spot_checks: int = 100, threads: int | None = None) -> BenchReport:
    if rows < 1 or cols < 1:
        raise ParameterError("rows and cols must be >= 1")
    spec = EwSpec(alpha, adjust)
    data_seed, check_seed = split_seed(seed, 2)
    try:
        data = rng(data_seed).standard_normal((rows, cols))
    except MemoryError:
        raise ResourceError(f"cannot allocate a {rows}x{cols} float64 table") from None
    seq = Sequence.from_values(data)
    threads = worker_count(cols) if threads is None else threads
    t0 = time.perf_counter()
    out = unroll_columns(EWMA(spec), seed, seq, threads).values().reshape(rows, cols)
    seconds = time.perf_counter() - t0

    gen = rng(check_seed)
    n_checks = min(spot_checks, rows * cols)
    cells = gen.choice(rows * cols, size=n_checks, replace=False)
    mismatches, max_err = 0, 0.0
    for cell in cells:
        r, c = divmod(int(cell), cols)
        expected = oracles.ew_moment_at(data[:, c], None, r, alpha, adjust, False, "mean")
        err = abs(out[r, c] - expected)
        max_err = max(max_err, err)
        if not err <= SPOT_TOLERANCE:
            mismatches += 1
    return BenchReport(rows, cols, seconds, n_checks, mismatches, max_err)
