"""``streamloop`` command line: apply, sync, demo and bench."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .bench import run_bench, worker_count
from .core import Sequence, unroll_columns
from .csvio import read_csv, write_csv
from .demos import DEMOS
from .exceptions import ResourceError, StreamloopError
from .pipeline import PipelineConfig, build_pipeline, flatten_rows, parse_config
from .sync import StreamSpec, execute, parse_mode, trace


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(3 if isinstance(exc, ResourceError) else 1)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Streaming time-series transforms driven from CSV files."""


@main.command()
@click.argument("input_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Pipeline file (ordered 'key = value' lines).")
@click.option("--op", help="Append one operator configured by the flags below.")
@click.option("--alpha", type=float)
@click.option("--adjust/--no-adjust", default=None)
@click.option("--ignore-na/--no-ignore-na", default=None)
@click.option("--window", type=int, help="Window length (rolling_mean) or size (buffer).")
@click.option("--min-periods", type=int)
@click.option("--lag", type=int, help="Step offset for lag, diff and pct_change.")
@click.option("--columns", help="Comma-separated data columns (default: all).")
@click.option("--timestamp-column", help="Timestamp column (default: first column).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", "-o", type=click.Path(dir_okay=False), required=True)
def apply(input_csv, config_path, op, alpha, adjust, ignore_na, window, min_periods, lag,
          columns, timestamp_column, seed, output):
    """Run an operator pipeline over the columns of INPUT_CSV."""
    try:
        config = parse_config(Path(config_path).read_text()) if config_path else PipelineConfig()
        if op:
            name = op.strip().lower()
            params = {"alpha": alpha, "adjust": adjust, "ignore_na": ignore_na}
            if name in ("lag", "diff", "pct_change"):
                params = {"k": lag}
            elif name == "rolling_mean":
                params = {"window": window, "min_periods": min_periods}
            elif name == "buffer":
                params = {"n": window}
            config.add(name, **params)
        if columns:
            config.columns = tuple(c.strip() for c in columns.split(","))
        if timestamp_column:
            config.timestamp = timestamp_column
        table = read_csv(input_csv, config.timestamp, config.columns)
        seq = table.sequence
        transform, names = build_pipeline(config, seq.columns)
        if len(seq):
            threads = worker_count(len(seq.columns))
            out = unroll_columns(transform, seed, seq, threads)
            rows = flatten_rows(out.rows, len(seq))
        else:
            rows = np.empty((0, len(names)))
        write_csv(output, Sequence(seq.timestamps, list(rows), names),
                  table.timestamp_column, table.iso_timestamps)
    except StreamloopError as exc:
        _fail(exc)


@main.command()
@click.argument("local_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("secondary_csv", nargs=-1, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", multiple=True,
              help="ffill or window:N; once for all streams or once per stream.")
@click.option("--latency-ns", multiple=True, type=int,
              help="Latency in nanoseconds; once for all streams or once per stream.")
@click.option("--schedule", "schedule_path", type=click.Path(dir_okay=False),
              help="Also write the traced schedule to this CSV file.")
@click.option("--output", "-o", type=click.Path(dir_okay=False), required=True)
def sync(local_csv, secondary_csv, mode, latency_ns, schedule_path, output):
    """Align SECONDARY_CSV streams onto the timestamps of LOCAL_CSV.

    Secondary columns are named ``<file stem>.<column>``; window slots get a
    ``[j]`` suffix, oldest first.
    """
    try:
        n = len(secondary_csv)
        modes = _per_stream(mode, n, "ffill", "--mode")
        latencies = _per_stream(latency_ns, n, 0, "--latency-ns")
        local = read_csv(local_csv)
        specs, data = [], {}
        for path, m, lat in zip(secondary_csv, modes, latencies):
            name = Path(path).stem
            while name in data:
                name += "_"
            table = read_csv(path)
            specs.append(StreamSpec(name, table.sequence.timestamps, lat, parse_mode(m)))
            data[name] = table.sequence
        schedule = trace(local.sequence.timestamps, specs)
        if schedule_path:
            schedule.to_csv(schedule_path)
        merged = execute(schedule, local.sequence, data)
        write_csv(output, merged, local.timestamp_column, local.iso_timestamps)
    except StreamloopError as exc:
        _fail(exc)


def _per_stream(values, n, default, flag):
    if not values:
        return [default] * n
    if len(values) == 1:
        return list(values) * n
    if len(values) != n:
        raise click.UsageError(f"{flag} given {len(values)} times for {n} streams")
    return list(values)


@main.command()
@click.argument("name", type=click.Choice(sorted(DEMOS)))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", "-o", type=click.Path(dir_okay=False), required=True)
def demo(name, seed, output):
    """Write a deterministic demo dataset (ohlc or online-regression)."""
    try:
        DEMOS[name](seed, output)
    except StreamloopError as exc:
        _fail(exc)


@main.command()
@click.option("--rows", type=click.IntRange(min=1), default=1_000_000, show_default=True)
@click.option("--cols", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--alpha", type=float, default=0.1, show_default=True)
@click.option("--adjust/--no-adjust", default=True, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def bench(rows, cols, alpha, adjust, seed):
    """Time EWMA over a seeded random table and spot-check it against the oracle."""
    try:
        report = run_bench(rows, cols, alpha, seed, adjust)
    except StreamloopError as exc:
        _fail(exc)
    click.echo(report.summary())
    if not report.passed:
        sys.exit(2)


if __name__ == "__main__":
    main()
