"""Integer encodings for timestamps and string labels.

A signed 64-bit nanosecond timestamp is split into two 32-bit words: ``hi``
is the arithmetic right shift by 32 (signed) and ``lo`` the low 32 bits
(unsigned), so ``v == hi * 2**32 + lo``. Labels are coded by their rank in
the sorted vocabulary of distinct values.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import CodeRangeError

_I64_MIN, _I64_MAX = -(2**63), 2**63 - 1
_LO_MASK = 0xFFFFFFFF


class EncodedTime(NamedTuple):
    hi: int
    lo: int


def encode_time(v) -> EncodedTime:
    v = int(v)
    if not _I64_MIN <= v <= _I64_MAX:
        raise OverflowError(f"{v} is not a signed 64-bit timestamp")
    return EncodedTime(v >> 32, v & _LO_MASK)


def decode_time(e) -> int:
    hi, lo = int(e[0]), int(e[1])
    if not -(2**31) <= hi < 2**31:
        raise OverflowError(f"hi word {hi} is not a signed 32-bit integer")
    if not 0 <= lo <= _LO_MASK:
        raise OverflowError(f"lo word {lo} is not an unsigned 32-bit integer")
    return (hi << 32) | lo


def encode_times(values) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`encode_time`: returns ``(hi: int32, lo: uint32)`` arrays."""
    v = np.asarray(values)
    if np.issubdtype(v.dtype, np.datetime64):
        v = v.astype("datetime64[ns]")
    v = v.view(np.int64) if v.dtype.kind == "M" else v.astype(np.int64)
    hi = (v >> 32).astype(np.int32)
    lo = (v & _LO_MASK).astype(np.uint32)
    return hi, lo


def decode_times(hi, lo) -> np.ndarray:
    hi = np.asarray(hi, dtype=np.int32).astype(np.int64)
    lo = np.asarray(lo, dtype=np.uint32).astype(np.int64)
    return (hi << 32) | lo


class LabelTable(NamedTuple):
    vocabulary: tuple
    codes: np.ndarray


def label_encode(strings) -> LabelTable:
    strings = list(strings)
    if not strings:
        return LabelTable((), np.empty(0, dtype=np.int64))
    vocab, codes = np.unique(np.asarray(strings, dtype=object), return_inverse=True)
    return LabelTable(tuple(vocab.tolist()), codes.astype(np.int64).ravel())


def label_decode(table: LabelTable) -> list:
    codes = np.asarray(table.codes, dtype=np.int64)
    n = len(table.vocabulary)
    bad = (codes < 0) | (codes >= n)
    if bad.any():
        raise CodeRangeError(f"code {int(codes[bad][0])} outside vocabulary of size {n}")
    return [table.vocabulary[c] for c in codes.tolist()]
