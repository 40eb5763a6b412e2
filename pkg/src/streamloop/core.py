"""Pure stateful transforms and the driver that folds them over a sequence.

A :class:`Transform` is a pair of pure functions::

    params, state = t.init(seed, input_shape)
    output, state = t.apply(params, state, row)

``unroll`` threads the state left to right through a :class:`Sequence`. Params
and state are flat ``dict[str, ndarray]`` maps; ``compose`` namespaces the
keys of its members with ``outer/`` and ``inner/``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .exceptions import EmptyInputError, ParameterError, ShapeError
from .validation import check_timestamps

Params = dict
State = dict
Shape = tuple

_MAX_SEED = 2**64 - 1


def _same_shape(input_shape):
    return input_shape


@dataclass(frozen=True)
class Transform:
    """A stateful computation expressed as an ``(init, apply)`` pair.

    ``output_shape`` maps an input shape to the shape of the rows ``apply``
    emits; it lets :func:`compose` initialise the outer member. Transforms
    flagged ``elementwise`` treat every entry of an array row independently,
    which allows the column-parallel driver in :func:`unroll_columns`.
    """

    init: Callable[[int, Shape], tuple[Params, State]]
    apply: Callable[[Params, State, Any], tuple[Any, State]]
    output_shape: Callable[[Shape], Shape] = field(default=_same_shape)
    elementwise: bool = False
    name: str = "transform"

    def __repr__(self):
        return f"Transform({self.name})"


def shape_of(row) -> Shape:
    """Shape descriptor of a row: an ndarray shape, or a tuple of them for tuple rows."""
    if isinstance(row, tuple):
        return tuple(shape_of(part) for part in row)
    return np.shape(row)


def _check_rank(shape, where="row"):
    if shape and all(isinstance(s, tuple) for s in shape):
        for part in shape:
            _check_rank(part, where)
    elif len(shape) > 2:
        raise ShapeError(f"{where} has rank {len(shape)}; at most rank 2 is supported")


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= _MAX_SEED:
        raise ParameterError("seed must be an unsigned 64-bit integer")
    return seed


def split_seed(seed: int, n: int) -> list[int]:
    """Derive ``n`` independent child seeds from ``seed`` deterministically."""
    words = np.random.SeedSequence(check_seed(seed)).generate_state(n, dtype=np.uint64)
    return [int(w) for w in words]


def rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(key=check_seed(seed)))


class Sequence:
    """Timestamped rows: the payload of one stream.

    ``timestamps`` are int64 nanoseconds, strictly increasing. ``rows`` may be
    scalars, arrays, or tuples of those (structured inputs such as ``(x, y)``
    pairs). ``columns`` optionally names the entries of 1-d rows.
    """

    __slots__ = ("timestamps", "rows", "columns")

    def __init__(self, timestamps, rows, columns=None):
        ts = check_timestamps(timestamps)
        rows = list(rows)
        if len(rows) != len(ts):
            raise ShapeError(f"{len(ts)} timestamps but {len(rows)} rows")
        self.timestamps = ts
        self.rows = rows
        self.columns = tuple(columns) if columns is not None else None

    @classmethod
    def from_values(cls, values, timestamps=None, columns=None) -> "Sequence":
        """Build a sequence from an array whose first axis is time.

        Missing timestamps default to ``0, 1, 2, ...``.
        """
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 0:
            raise ShapeError("values must have a time axis")
        if timestamps is None:
            timestamps = np.arange(len(arr), dtype=np.int64)
        return cls(timestamps, list(arr), columns)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Sequence(self.timestamps[item], self.rows[item], self.columns)
        return self.rows[item]

    def __repr__(self):
        return f"Sequence(n={len(self)}, columns={self.columns})"

    def values(self) -> np.ndarray:
        """Stack the rows into one float array (time on the first axis)."""
        if not self.rows:
            return np.empty((0,), dtype=np.float64)
        return np.asarray(self.rows, dtype=np.float64)


def scan(transform: Transform, params: Params, state: State, rows) -> tuple[list, State]:
    """Fold ``transform.apply`` over ``rows``; return the outputs and the final state."""
    apply = transform.apply
    outputs = []
    append = outputs.append
    for row in rows:
        out, state = apply(params, state, row)
        append(out)
    return outputs, state


def _common_shape(rows) -> Shape:
    if not rows:
        raise EmptyInputError("cannot unroll over an empty sequence")
    shape = shape_of(rows[0])
    _check_rank(shape)
    for i, row in enumerate(rows):
        if shape_of(row) != shape:
            raise ShapeError(f"row {i} has shape {shape_of(row)}, expected {shape}")
    return shape


def unroll(
    transform: Transform,
    seed: int,
    seq: Sequence,
    *,
    params: Params | None = None,
    state: State | None = None,
    return_state: bool = False,
):
    """Apply ``transform`` step by step along ``seq``.

    The state starts from ``transform.init(seed, row_shape)`` unless ``state``
    (and optionally ``params``) is passed, which resumes an earlier run. With
    ``return_state=True`` the result is ``(outputs, params, final_state)``.
    """
    shape = _common_shape(seq.rows)
    if state is None or params is None:
        init_params, init_state = transform.init(check_seed(seed), shape)
        params = init_params if params is None else params
        state = init_state if state is None else state
    outputs, state = scan(transform, params, state, seq.rows)
    out = Sequence(seq.timestamps, outputs)
    if return_state:
        return out, params, state
    return out


def unroll_columns(transform: Transform, seed: int, seq: Sequence, threads: int = 1) -> Sequence:
    """Unroll an element-wise transform over column blocks, possibly on threads.

    The result equals ``unroll(transform, seed, seq)`` exactly; only the
    scheduling differs.
    """
    from concurrent.futures import ThreadPoolExecutor

    values = seq.values()
    if values.ndim != 2 or threads <= 1 or not transform.elementwise:
        return unroll(transform, seed, seq)
    blocks = [b for b in np.array_split(np.arange(values.shape[1]), threads) if b.size]

    def run(cols):
        block = Sequence(seq.timestamps, list(values[:, cols]))
        return unroll(transform, seed, block).values()

    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        parts = list(pool.map(run, blocks))
    return Sequence(seq.timestamps, list(np.concatenate(parts, axis=1)), seq.columns)


def identity() -> Transform:
    def init(seed, input_shape):
        return {}, {}

    def apply(params, state, x):
        return x, state

    return Transform(init, apply, elementwise=True, name="identity")


def _prefixed(mapping, prefix):
    return {prefix + k: v for k, v in mapping.items()}


def _strip(mapping, prefix):
    n = len(prefix)
    return {k[n:]: v for k, v in mapping.items() if k.startswith(prefix)}


def compose(outer: Transform, inner: Transform) -> Transform:
    """Chain two transforms: ``inner`` runs first, its output feeds ``outer``."""

    def init(seed, input_shape):
        inner_seed, outer_seed = split_seed(seed, 2)
        p_in, s_in = inner.init(inner_seed, input_shape)
        p_out, s_out = outer.init(outer_seed, inner.output_shape(input_shape))
        params = {**_prefixed(p_out, "outer/"), **_prefixed(p_in, "inner/")}
        state = {**_prefixed(s_out, "outer/"), **_prefixed(s_in, "inner/")}
        return params, state

    def apply(params, state, x):
        mid, s_in = inner.apply(_strip(params, "inner/"), _strip(state, "inner/"), x)
        y, s_out = outer.apply(_strip(params, "outer/"), _strip(state, "outer/"), mid)
        return y, {**_prefixed(s_out, "outer/"), **_prefixed(s_in, "inner/")}

    def output_shape(input_shape):
        return outer.output_shape(inner.output_shape(input_shape))

    return Transform(
        init,
        apply,
        output_shape,
        elementwise=outer.elementwise and inner.elementwise,
        name=f"{outer.name}({inner.name})",
    )


def chain(*transforms: Transform) -> Transform:
    """Compose transforms in application order: ``chain(f, g)`` runs ``f`` then ``g``."""
    if not transforms:
        return identity()
    out = transforms[0]
    for t in transforms[1:]:
        out = compose(t, out)
    return out
