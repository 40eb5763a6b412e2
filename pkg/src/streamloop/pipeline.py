"""Declarative operator pipelines for the command line.

A pipeline file is a flat, ordered list of ``key = value`` lines. ``#``
starts a comment. Keys before the first ``op`` line are global; every ``op``
line starts a new operator and the keys that follow are its parameters::

    timestamp = time
    columns = air, ground
    op = ewma
    alpha = 0.1
    adjust = false
    op = lag
    k = 1

Operators and parameters (defaults in brackets):

=============  ===============================================
ewma           alpha, adjust [true], ignore_na [false]
ewmvar         alpha, adjust [true], ignore_na [false]
ewmcov         alpha, adjust [true], ignore_na [false]; needs 2 columns
lag            k [1]
diff           k [1]
pct_change     k [1]
rolling_mean   window, min_periods [window]
buffer         n
=============  ===============================================
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Transform, chain
from .exceptions import ParameterError, ShapeError
from .modules import EWMA, Buffer, Diff, EWMCov, EWMVar, EwSpec, Lag, PctChange, RollingMean

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ParameterError(f"expected a boolean, got {text!r}")


def _int(text):
    try:
        return int(str(text).strip())
    except ValueError:
        raise ParameterError(f"expected an integer, got {text!r}") from None


def _float(text):
    try:
        return float(str(text).strip())
    except ValueError:
        raise ParameterError(f"expected a number, got {text!r}") from None


_EW_KEYS = {"alpha": _float, "adjust": parse_bool, "ignore_na": parse_bool}
OPERATORS = {
    "ewma": _EW_KEYS,
    "ewmvar": _EW_KEYS,
    "ewmcov": _EW_KEYS,
    "lag": {"k": _int},
    "diff": {"k": _int},
    "pct_change": {"k": _int},
    "rolling_mean": {"window": _int, "min_periods": _int},
    "buffer": {"n": _int},
}
_REQUIRED = {"ewma": ("alpha",), "ewmvar": ("alpha",), "ewmcov": ("alpha",),
             "rolling_mean": ("window",), "buffer": ("n",)}


@dataclass
class OperatorConfig:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class PipelineConfig:
    operators: list = field(default_factory=list)
    columns: tuple | None = None
    timestamp: str | None = None

    def add(self, name: str, **params) -> "PipelineConfig":
        """Append an operator after checking its name and parameters."""
        name = name.strip().lower()
        if name not in OPERATORS:
            raise ParameterError(f"unknown operator {name!r}; known: {', '.join(OPERATORS)}")
        parsed = {}
        for key, value in params.items():
            if value is None:
                continue
            if key not in OPERATORS[name]:
                raise ParameterError(f"operator {name!r} has no parameter {key!r}")
            parsed[key] = OPERATORS[name][key](value)
        for key in _REQUIRED.get(name, ()):
            if key not in parsed:
                raise ParameterError(f"operator {name!r} needs {key!r}")
        self.operators.append(OperatorConfig(name, parsed))
        return self


def parse_config(text: str) -> PipelineConfig:
    config = PipelineConfig()
    pending = None

    def flush():
        if pending is not None:
            config.add(pending[0], **pending[1])

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key == "op":
                flush()
                pending = (value, {})
            elif pending is not None:
                if key in pending[1]:
                    raise ParameterError(f"duplicate key {key!r}")
                pending[1][key] = value
            elif key == "columns":
                config.columns = tuple(c.strip() for c in value.split(",") if c.strip())
            elif key == "timestamp":
                config.timestamp = value
            else:
                raise ParameterError(f"unknown global key {key!r}")
        except ParameterError as exc:
            raise ParameterError(f"line {lineno}: {exc}") from None
    try:
        flush()
    except ParameterError as exc:
        raise ParameterError(f"in last operator: {exc}") from None
    return config


def _pair_columns() -> Transform:
    """Turn a length-2 vector row into an ``(x, y)`` pair."""

    def init(seed, input_shape):
        if input_shape != (2,):
            raise ShapeError(f"ewmcov needs exactly two columns, got row shape {input_shape}")
        return {}, {}

    def apply(params, state, row):
        return (row[0], row[1]), state

    return Transform(init, apply, lambda s: ((), ()), name="pair")


def build_pipeline(config: PipelineConfig, columns) -> tuple[Transform, list[str]]:
    """Compose the configured operators; return the transform and its output column names."""
    names = list(columns)
    width_shape = (len(names),)
    stages = []
    for op in config.operators:
        p = op.params
        if op.name in ("ewma", "ewmvar", "ewmcov"):
            spec = EwSpec(p["alpha"], p.get("adjust", True), p.get("ignore_na", False))
            if op.name == "ewmcov":
                if width_shape != (2,):
                    raise ShapeError(f"ewmcov needs exactly two columns, got {names}")
                stages += [_pair_columns(), EWMCov(spec)]
                names, width_shape = [f"ewmcov({names[0]},{names[1]})"], ()
            else:
                stages.append((EWMA if op.name == "ewma" else EWMVar)(spec))
        elif op.name == "lag":
            stages.append(Lag(p.get("k", 1)))
        elif op.name == "diff":
            stages.append(Diff(p.get("k", 1)))
        elif op.name == "pct_change":
            stages.append(PctChange(p.get("k", 1)))
        elif op.name == "rolling_mean":
            stages.append(RollingMean(p["window"], p.get("min_periods")))
        elif op.name == "buffer":
            if len(width_shape) > 1:
                raise ShapeError("buffer cannot be applied twice")
            n = p["n"]
            stages.append(Buffer(n))
            names = [f"{c}[{j}]" for j in range(n) for c in names] if width_shape else \
                [f"{names[0]}[{j}]" for j in range(n)]
            width_shape = (n, *width_shape)
    return chain(*stages), names


def flatten_rows(rows, n_steps) -> np.ndarray:
    return np.asarray(rows, dtype=np.float64).reshape(n_steps, -1)
