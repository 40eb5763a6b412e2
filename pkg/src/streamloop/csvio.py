"""CSV ingestion and output for timestamped float tables.

The timestamp column holds either ISO-8601 UTC datetimes (``Z`` or
``+00:00`` suffix optional, up to nanosecond precision) or integer
nanoseconds since the epoch. Other columns are floats; an empty cell or
``NaN`` means missing. Floats are written in shortest round-trip form and
missing values as empty cells, so write-then-read is lossless.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Sequence
from .exceptions import OrderingError, StreamloopError

_INT_RE = re.compile(r"^[+-]?\d+$")
_NAN_TOKENS = {"", "nan", "NaN", "NAN"}


class CsvParseError(StreamloopError, ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@dataclass
class CsvTable:
    sequence: Sequence
    timestamp_column: str
    iso_timestamps: bool


def parse_timestamp(text: str) -> int:
    text = text.strip()
    if _INT_RE.match(text):
        return int(text)
    if text.endswith("Z"):
        text = text[:-1]
    elif text.endswith("+00:00"):
        text = text[:-6]
    return int(np.datetime64(text, "ns").astype(np.int64))


def format_timestamp(ns: int, iso: bool) -> str:
    if not iso:
        return str(int(ns))
    return np.datetime_as_string(np.datetime64(int(ns), "ns"), unit="ns") + "Z"


def format_float(value) -> str:
    value = float(value)
    return "" if math.isnan(value) else repr(value)


def read_csv(path, timestamp_column: str | None = None, columns=None) -> CsvTable:
    """Read a timestamped CSV into a :class:`Sequence` of float vectors.

    ``timestamp_column`` defaults to the first column; ``columns`` selects and
    orders the data columns (default: all others).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(path, 1, "empty file") from None
        header = [h.strip() for h in header]
        ts_col = timestamp_column or header[0]
        if ts_col not in header:
            raise CsvParseError(path, 1, f"no timestamp column {ts_col!r}")
        ts_idx = header.index(ts_col)
        names = [h for h in header if h != ts_col] if columns is None else list(columns)
        for name in names:
            if name not in header:
                raise CsvParseError(path, 1, f"no column {name!r}")
        idx = [header.index(n) for n in names]
        stamps, rows, iso = [], [], None
        for line, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise CsvParseError(path, line, f"expected {len(header)} cells, got {len(rec)}")
            cell = rec[ts_idx].strip()
            try:
                stamps.append(parse_timestamp(cell))
            except ValueError:
                raise CsvParseError(path, line, f"bad timestamp {cell!r}") from None
            is_iso = not _INT_RE.match(cell)
            iso = is_iso if iso is None else iso
            row = []
            for j in idx:
                text = rec[j].strip()
                if text in _NAN_TOKENS:
                    row.append(math.nan)
                    continue
                try:
                    row.append(float(text))
                except ValueError:
                    raise CsvParseError(path, line, f"bad number {text!r} in column {header[j]!r}") from None
            rows.append(row)
    ts = np.array(stamps, dtype=np.int64)
    steps = np.diff(ts)
    if np.any(steps <= 0):
        bad = int(np.argmax(steps <= 0)) + 1
        raise OrderingError(f"{path}:{bad + 2}: timestamps must be strictly increasing")
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    seq = Sequence(ts, list(values), names)
    return CsvTable(seq, ts_col, bool(iso) if iso is not None else True)


def write_csv(path, seq: Sequence, timestamp_column: str = "timestamp",
              iso_timestamps: bool = True, columns=None) -> None:
    """Write a sequence of flat float rows (scalars or 1-d arrays)."""
    values = seq.values().reshape(len(seq), -1) if len(seq) else np.empty((0, 0))
    names = list(columns if columns is not None else seq.columns or
                 [f"c{j}" for j in range(values.shape[1])])
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([timestamp_column, *names])
        for ts, row in zip(seq.timestamps, values):
            writer.writerow([format_timestamp(ts, iso_timestamps), *map(format_float, row)])
