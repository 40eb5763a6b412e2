"""Align secondary event streams onto a local stream without leaking the future.

Synchronisation is split in two passes:

``trace``
    looks only at timestamps and decides, for every local step, which
    secondary rows may be read: the latest admissible row (forward fill) or
    the rows that became admissible since the previous step (window). A
    secondary event stamped ``ts`` with latency ``L`` is admissible at local
    time ``t`` iff ``ts + L <= t``.
``execute``
    gathers the scheduled rows into one flat merged row per local step.

Schedules can be written to and read from CSV so the trace can be cached.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import Sequence, Transform, unroll
from .exceptions import ConsistencyError, ParameterError
from .validation import check_positive_int, check_timestamps

_INT64_MAX = np.iinfo(np.int64).max
SCHEDULE_FIELDS = ("step", "stream", "kind", "start", "stop", "pad", "overflow")


@dataclass(frozen=True)
class ForwardFill:
    def __str__(self):
        return "ffill"


@dataclass(frozen=True)
class Window:
    buffer_size: int

    def __post_init__(self):
        object.__setattr__(self, "buffer_size", check_positive_int(self.buffer_size, "buffer_size"))

    def __str__(self):
        return f"window:{self.buffer_size}"


def parse_mode(text) -> ForwardFill | Window:
    """Parse ``"ffill"`` or ``"window:N"``."""
    if isinstance(text, (ForwardFill, Window)):
        return text
    text = str(text).strip().lower()
    if text == "ffill":
        return ForwardFill()
    if text.startswith("window:"):
        try:
            size = int(text.split(":", 1)[1])
        except ValueError:
            raise ParameterError(f"bad window size in mode {text!r}") from None
        return Window(size)
    raise ParameterError(f"unknown sync mode {text!r}; expected 'ffill' or 'window:N'")


@dataclass(frozen=True)
class StreamSpec:
    """A secondary stream as seen by the trace pass: timestamps only.

    Repeated timestamps are allowed and keep their original order.
    """

    name: str
    timestamps: np.ndarray = field(repr=False)
    latency: int = 0
    mode: ForwardFill | Window = ForwardFill()

    def __post_init__(self):
        ts = check_timestamps(self.timestamps, f"timestamps of stream {self.name!r}", strict=False)
        latency = int(self.latency)
        if latency < 0:
            raise ParameterError(f"latency of stream {self.name!r} must be >= 0")
        if ts.size and latency and int(ts[-1]) > _INT64_MAX - latency:
            raise ParameterError(f"latency of stream {self.name!r} overflows int64 timestamps")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "latency", latency)
        object.__setattr__(self, "mode", parse_mode(self.mode))

    @classmethod
    def for_sequence(cls, name, seq: Sequence, mode="ffill", latency=0) -> "StreamSpec":
        return cls(name, seq.timestamps, latency, parse_mode(mode))


@dataclass(frozen=True)
class StreamSchedule:
    """Access plan of one secondary stream, one entry per local step.

    Rows ``start[t]:stop[t]`` are read at step ``t``. Forward fill reads at
    most one row (``start == -1`` means none yet). A window is front-padded
    with ``pad[t]`` NaN rows up to ``buffer_size``; ``overflow[t]`` counts the
    oldest admissible rows dropped because the window was full.
    """

    name: str
    kind: str
    buffer_size: int
    start: np.ndarray
    stop: np.ndarray
    pad: np.ndarray
    overflow: np.ndarray
    n_events: int | None = None

    def indices(self, step: int) -> list[int]:
        return list(range(max(int(self.start[step]), 0), int(self.stop[step])))


@dataclass(frozen=True)
class Schedule:
    n_steps: int
    streams: tuple[StreamSchedule, ...]

    def __getitem__(self, name) -> StreamSchedule:
        for s in self.streams:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def names(self):
        return tuple(s.name for s in self.streams)

    def records(self):
        """Flat ``(step, stream, kind, start, stop, pad, overflow)`` tuples, step-major."""
        for t in range(self.n_steps):
            for s in self.streams:
                yield (t, s.name, s.kind, int(s.start[t]), int(s.stop[t]),
                       int(s.pad[t]), int(s.overflow[t]))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SCHEDULE_FIELDS)
        writer.writerows(self.records())
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "Schedule":
        """Read a schedule written by :meth:`to_csv` (a path or the CSV text)."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            source = Path(source).read_text()
        reader = csv.DictReader(io.StringIO(source))
        if tuple(reader.fieldnames or ()) != SCHEDULE_FIELDS:
            raise ConsistencyError(f"schedule header must be {','.join(SCHEDULE_FIELDS)}")
        per_stream: dict[str, list] = {}
        kinds: dict[str, str] = {}
        n_steps = 0
        for rec in reader:
            name = rec["stream"]
            kinds.setdefault(name, rec["kind"])
            per_stream.setdefault(name, []).append(
                [int(rec[k]) for k in ("step", "start", "stop", "pad", "overflow")]
            )
            n_steps = max(n_steps, int(rec["step"]) + 1)
        streams = []
        for name, rows in per_stream.items():
            arr = np.array(rows, dtype=np.int64)
            if len(arr) != n_steps or not np.array_equal(arr[:, 0], np.arange(n_steps)):
                raise ConsistencyError(f"stream {name!r} does not cover every step exactly once")
            kind = kinds[name]
            size = 1 if kind == "ffill" else int(arr[0, 2] - arr[0, 1] + arr[0, 3])
            streams.append(StreamSchedule(name, kind, size, arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4]))
        return cls(n_steps, tuple(streams))


def _trace_one(local: np.ndarray, spec: StreamSpec) -> StreamSchedule:
    visible = spec.timestamps + spec.latency
    # number of events admissible at each local step
    hi = np.searchsorted(visible, local, side="right").astype(np.int64)
    if isinstance(spec.mode, ForwardFill):
        start = hi - 1
        stop = np.where(hi > 0, hi, 0)
        pad = (hi == 0).astype(np.int64)
        return StreamSchedule(spec.name, "ffill", 1, start, stop, pad,
                              np.zeros_like(hi), len(visible))
    n = spec.mode.buffer_size
    # the first step sees everything admissible so far
    lo = np.concatenate([[0], hi[:-1]]).astype(np.int64)
    start = np.maximum(lo, hi - n)
    kept = hi - start
    return StreamSchedule(spec.name, "window", n, start, hi.copy(), n - kept,
                          (hi - lo) - kept, len(visible))


def trace(local, streams: Iterable[StreamSpec]) -> Schedule:
    """Compute the access schedule from timestamps alone."""
    local = check_timestamps(local, "local timestamps")
    streams = list(streams)
    names = [s.name for s in streams]
    if len(set(names)) != len(names):
        raise ParameterError(f"stream names must be unique, got {names}")
    return Schedule(len(local), tuple(_trace_one(local, s) for s in streams))


def _flat_rows(seq: Sequence) -> np.ndarray:
    values = seq.values()
    return values.reshape(len(seq), -1) if len(seq) else values.reshape(0, 1)


def _column_names(seq: Sequence, width: int, prefix: str):
    cols = seq.columns if seq.columns is not None and len(seq.columns) == width else range(width)
    return [f"{prefix}.{c}" for c in cols]


def execute(schedule: Schedule, local_data: Sequence,
            stream_data: Mapping[str, Sequence]) -> Sequence:
    """Materialise merged rows: local row, then each stream's slots in schedule order.

    Forward-fill slots hold one row (NaN before the first admissible event);
    window slots hold ``buffer_size`` rows, oldest first, NaN-padded at the
    front. Every row is flattened; the result's ``columns`` name the slots.
    """
    if len(local_data) != schedule.n_steps:
        raise ConsistencyError(
            f"schedule has {schedule.n_steps} steps but local data has {len(local_data)} rows")
    local = _flat_rows(local_data)
    if local_data.columns is not None and len(local_data.columns) == local.shape[1]:
        columns = list(local_data.columns)
    else:
        columns = [f"local.{j}" for j in range(local.shape[1])]
    blocks = [local]
    for s in schedule.streams:
        if s.name not in stream_data:
            raise ConsistencyError(f"no data for stream {s.name!r}")
        data = stream_data[s.name]
        if s.n_events is not None and len(data) != s.n_events:
            raise ConsistencyError(
                f"stream {s.name!r} was traced with {s.n_events} events, got {len(data)} rows")
        values = _flat_rows(data)
        n_rows, width = values.shape
        if schedule.n_steps and int(s.stop.max()) > n_rows:
            raise ConsistencyError(f"schedule reads past the end of stream {s.name!r}")
        names = _column_names(data, width, s.name)
        # gather index of slot j at step t; slots before ``start`` are padding
        idx = s.stop[:, None] - s.buffer_size + np.arange(s.buffer_size)[None, :]
        valid = (idx >= np.maximum(s.start, 0)[:, None]) & (idx >= 0)
        padded = np.vstack([values, np.full((1, width), np.nan)])
        gathered = padded[np.where(valid, idx, n_rows)]  # (steps, slots, width)
        blocks.append(gathered.reshape(schedule.n_steps, -1))
        if s.kind == "ffill":
            columns.extend(names)
        else:
            columns.extend(f"{c}[{j}]" for j in range(s.buffer_size) for c in names)
    merged = np.hstack(blocks) if schedule.n_steps else np.empty((0, len(columns)))
    return Sequence(local_data.timestamps, list(merged), columns)


def synchronized_unroll(transform: Transform, seed: int, local_data: Sequence,
                        streams: Iterable[tuple[StreamSpec, Sequence]]) -> Sequence:
    """``unroll(transform, seed, execute(trace(...), ...))`` in one call.

    ``streams`` pairs each :class:`StreamSpec` with its data; the spec's
    timestamps must be those of the data.
    """
    streams = list(streams)
    if not streams:
        return unroll(transform, seed, local_data)
    for spec, data in streams:
        if not np.array_equal(spec.timestamps, data.timestamps):
            raise ConsistencyError(f"timestamps of stream {spec.name!r} differ from its data")
    schedule = trace(local_data.timestamps, [spec for spec, _ in streams])
    merged = execute(schedule, local_data, {spec.name: data for spec, data in streams})
    out = unroll(transform, seed, merged)
    return Sequence(out.timestamps, out.rows, merged.columns if transform.elementwise else None)

