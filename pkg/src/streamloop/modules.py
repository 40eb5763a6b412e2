"""Incremental, NaN-aware operators built on the :class:`~streamloop.core.Transform` contract.

Every operator accepts scalar rows and works element-wise over 1-d (or, where
noted, 2-d) array rows. NaN marks a missing value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Sequence, Transform, identity, shape_of, unroll
from .exceptions import ParameterError, ShapeError
from .validation import check_alpha, check_positive_int

_NAN = np.nan


@dataclass(frozen=True)
class EwSpec:
    """Exponential weighting: decay ``1 - alpha`` per step.

    ``adjust=True`` normalises the finite weighted sum; ``adjust=False`` is
    the plain recursion ``y = alpha * x + (1 - alpha) * y_prev``.
    ``ignore_na=True`` weights observations by their rank among observed
    values; ``False`` by their absolute position in time.
    """

    alpha: float
    adjust: bool = True
    ignore_na: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        object.__setattr__(self, "adjust", bool(self.adjust))
        object.__setattr__(self, "ignore_na", bool(self.ignore_na))


@dataclass(frozen=True)
class WindowSpec:
    length: int
    min_periods: int | None = None

    def __post_init__(self):
        length = check_positive_int(self.length, "length")
        minp = length if self.min_periods is None else check_positive_int(self.min_periods, "min_periods")
        if minp > length:
            raise ParameterError(f"min_periods ({minp}) must not exceed length ({length})")
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "min_periods", minp)


def _as_ew_spec(spec, adjust, ignore_na) -> EwSpec:
    if isinstance(spec, EwSpec):
        return spec
    return EwSpec(spec, adjust, ignore_na)


def _out(arr):
    # 0-d results become numpy scalars so scalar streams stay scalar
    return arr[()] if arr.ndim == 0 else arr


def _check_array_shape(shape, name, max_rank=2):
    if shape and isinstance(shape[0], tuple):
        raise ShapeError(f"{name} expects array rows, got a structured row of shape {shape}")
    if len(shape) > max_rank:
        raise ShapeError(f"{name} accepts rows of rank <= {max_rank}, got shape {shape}")


# -- buffering and delays ---------------------------------------------------


def _buffer_push(buf, x):
    return np.concatenate([buf[1:], np.asarray(x, dtype=np.float64)[None]])


def Buffer(n: int, fill_value: float = _NAN) -> Transform:
    """The last ``n`` inputs, oldest first, padded with ``fill_value`` at the front."""
    n = check_positive_int(n, "n")

    def init(seed, input_shape):
        _check_array_shape(input_shape, "Buffer", max_rank=1)
        return {}, {"buffer": np.full((n, *input_shape), fill_value, dtype=np.float64)}

    def apply(params, state, x):
        buf = _buffer_push(state["buffer"], x)
        return buf, {"buffer": buf}

    return Transform(init, apply, lambda s: (n, *s), name=f"Buffer({n})")


def Lag(k: int = 1, fill_value: float = _NAN) -> Transform:
    """Delay by ``k`` steps; the first ``k`` outputs are ``fill_value``."""
    k = check_positive_int(k, "k")
    buffer = Buffer(k + 1, fill_value)

    def apply(params, state, x):
        buf, state = buffer.apply(params, state, x)
        return _out(buf[0]), state

    return Transform(buffer.init, apply, elementwise=True, name=f"Lag({k})")


def Diff(k: int = 1) -> Transform:
    """``x[t] - x[t-k]``."""
    lag = Lag(k)

    def apply(params, state, x):
        prev, state = lag.apply(params, state, x)
        return _out(np.asarray(x, dtype=np.float64) - prev), state

    return Transform(lag.init, apply, elementwise=True, name=f"Diff({k})")


def PctChange(k: int = 1) -> Transform:
    """``x[t] / x[t-k] - 1``.

    A zero denominator, or a ratio that overflows, yields NaN rather than
    infinity.
    """
    lag = Lag(k)

    def apply(params, state, x):
        prev, state = lag.apply(params, state, x)
        x = np.asarray(x, dtype=np.float64)
        prev = np.asarray(prev)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = x / prev - 1.0
        out = np.where((prev == 0.0) | np.isinf(out), _NAN, out)
        return _out(out), state

    return Transform(lag.init, apply, elementwise=True, name=f"PctChange({k})")


def _window_mean(window, min_periods):
    """Mean of the non-NaN entries of a 1-d window, or NaN below ``min_periods``.

    The sum is correctly rounded (``math.fsum``), so the result does not
    depend on where the observations sit inside the window.
    """
    obs = [v for v in window.tolist() if v == v]
    if len(obs) < min_periods:
        return _NAN
    return math.fsum(obs) / len(obs)


def RollingMean(window, min_periods: int | None = None) -> Transform:
    """Mean over the last ``length`` inputs, skipping NaN.

    ``window`` is a :class:`WindowSpec` or a window length; ``min_periods``
    defaults to the full length.
    """
    spec = window if isinstance(window, WindowSpec) else WindowSpec(window, min_periods)
    buffer = Buffer(spec.length)
    minp = spec.min_periods

    def apply(params, state, x):
        buf, state = buffer.apply(params, state, x)
        if buf.ndim == 1:
            return np.float64(_window_mean(buf, minp)), state
        cols = buf.reshape(spec.length, -1)
        out = np.array([_window_mean(cols[:, j], minp) for j in range(cols.shape[1])])
        return out.reshape(buf.shape[1:]), state

    return Transform(
        buffer.init, apply, elementwise=True, name=f"RollingMean({spec.length}, {minp})"
    )


# -- exponentially weighted moments -----------------------------------------


def _ew_transform(spec: EwSpec, kind: str) -> Transform:
    """Shared engine for EWMA ("mean"), EWMVar ("var") and EWMCov ("cov").

    All three keep, per element, the number of observations, the weight sum
    ``s0``, the sum of squared weights ``s2``, the weighted mean(s) and, for
    the second moments, the weighted co-moment. When previous weights decay by
    ``d`` and a new observation arrives with weight ``w``::

        s0 <- d*s0 + w ;  mean <- mean + (w/s0) * (x - mean)
        C  <- d*C + w * (x - mean_x_old) * (y - mean_y_new)

    and the debiased estimate is ``C / (s0 - s2/s0)``.
    """
    alpha, adjust, ignore_na = spec.alpha, spec.adjust, spec.ignore_na
    decay = 1.0 - alpha
    paired = kind == "cov"
    second = kind != "mean"
    # adjust=False with ignore_na=False reports a gap as NaN
    nan_on_gap = not adjust and not ignore_na
    # adjust=True with ignore_na=False keeps decaying through gaps
    decay_on_gap = adjust and not ignore_na

    def init(seed, input_shape):
        if paired:
            if not (isinstance(input_shape, tuple) and len(input_shape) == 2
                    and all(isinstance(s, tuple) for s in input_shape)):
                raise ShapeError("EWMCov expects (x, y) pair rows")
            if input_shape[0] != input_shape[1]:
                raise ShapeError(f"EWMCov pair shapes differ: {input_shape}")
            shape = input_shape[0]
        else:
            shape = input_shape
        _check_array_shape(shape, f"EW{kind}")
        state = {
            "nobs": np.zeros(shape, dtype=np.int64),
            "s0": np.zeros(shape),
            "mean_x": np.full(shape, _NAN),
        }
        if second:
            state["s2"] = np.zeros(shape)
            state["comoment"] = np.zeros(shape)
        if paired:
            state["mean_y"] = np.full(shape, _NAN)
        return {}, state

    def output_shape(input_shape):
        return input_shape[0] if paired else input_shape

    def estimate(state):
        if kind == "mean":
            return np.where(state["nobs"] > 0, state["mean_x"], _NAN)
        s0, s2 = state["s0"], state["s2"]
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = s0 - s2 / s0
            est = state["comoment"] / denom
        est = np.where((state["nobs"] >= 2) & (denom > 0), est, _NAN)
        if kind == "var":
            est = np.maximum(est, 0.0)
        return est

    def apply(params, state, row):
        if paired:
            x = np.asarray(row[0], dtype=np.float64)
            y = np.asarray(row[1], dtype=np.float64)
            obs = ~(np.isnan(x) | np.isnan(y))
        else:
            x = y = np.asarray(row, dtype=np.float64)
            obs = ~np.isnan(x)
        nobs = state["nobs"]
        if obs.all() and nobs.all():
            return _steady_step(state, x, y)
        first = nobs == 0
        # weight of the incoming observation; the first one always counts 1
        w = 1.0 if adjust else np.where(first, 1.0, alpha)
        # previous weights decay when something is observed, and through gaps
        # for position-based weighting
        d = np.where(obs | decay_on_gap, decay, 1.0)
        s0 = np.where(obs, d * state["s0"] + w, d * state["s0"])
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(obs, w / s0, 0.0)
        mx_old = state["mean_x"]
        mx = _mean_update(mx_old, x, frac, obs, first)
        new = {"nobs": nobs + obs, "s0": s0, "mean_x": mx}
        if paired:
            my = _mean_update(state["mean_y"], y, frac, obs, first)
            new["mean_y"] = my
        else:
            my = mx
        if second:
            new["s2"] = np.where(obs, d * d * state["s2"] + w * w, d * d * state["s2"])
            with np.errstate(invalid="ignore"):
                bump = np.where(obs, w * (x - np.where(first, x, mx_old)) * (y - my), 0.0)
            new["comoment"] = d * state["comoment"] + bump
        out = estimate(new)
        if nan_on_gap:
            out = np.where(obs, out, _NAN)
        return _out(out), new

    w_steady = 1.0 if adjust else alpha

    def _steady_step(state, x, y):
        # every element observed and already initialised: no masking needed
        s0 = decay * state["s0"] + w_steady
        frac = w_steady / s0
        mx_old = state["mean_x"]
        mx = _steady_mean(mx_old, x, frac)
        new = {"nobs": state["nobs"] + 1, "s0": s0, "mean_x": mx}
        if kind == "mean":
            return _out(mx), new
        my = mx
        if paired:
            my = _steady_mean(state["mean_y"], y, frac)
            new["mean_y"] = my
        new["s2"] = decay * decay * state["s2"] + w_steady * w_steady
        new["comoment"] = decay * state["comoment"] + w_steady * (x - mx_old) * (y - my)
        return _out(estimate(new)), new

    names = {"mean": "EWMA", "var": "EWMVar", "cov": "EWMCov"}
    return Transform(
        init, apply, output_shape, elementwise=not paired, name=f"{names[kind]}({alpha})"
    )


def _steady_mean(mean, x, frac):
    stepped = np.minimum(np.maximum(mean + frac * (x - mean), np.fmin(mean, x)), np.fmax(mean, x))
    return np.where(frac == 1.0, x, stepped)


def _mean_update(mean, x, frac, obs, first):
    with np.errstate(invalid="ignore"):
        stepped = mean + frac * (x - mean)
    # the exact weighted mean lies between the old mean and x; clip rounding
    stepped = np.clip(stepped, np.fmin(mean, x), np.fmax(mean, x))
    stepped = np.where(frac == 1.0, x, stepped)
    out = np.where(first, x, stepped)
    return np.where(obs, out, mean)


def EWMA(spec, adjust: bool = True, ignore_na: bool = False) -> Transform:
    """Exponentially weighted moving average; ``spec`` is an EwSpec or an alpha."""
    return _ew_transform(_as_ew_spec(spec, adjust, ignore_na), "mean")


def EWMVar(spec, adjust: bool = True, ignore_na: bool = False) -> Transform:
    """Debiased exponentially weighted variance (NaN before two observations)."""
    return _ew_transform(_as_ew_spec(spec, adjust, ignore_na), "var")


def EWMCov(spec, adjust: bool = True, ignore_na: bool = False) -> Transform:
    """Debiased exponentially weighted covariance of ``(x, y)`` pair rows."""
    return _ew_transform(_as_ew_spec(spec, adjust, ignore_na), "cov")


# -- event-driven operators -------------------------------------------------


def UpdateOnEvent(inner: Transform, initial_output=_NAN) -> Transform:
    """Run ``inner`` only on steps whose event flag is true.

    Rows are ``(event, payload)``. On non-event steps the inner state is left
    alone and the last inner output is emitted again; before the first event
    that output is ``initial_output``.
    """

    def init(seed, input_shape):
        if not (isinstance(input_shape, tuple) and len(input_shape) == 2
                and isinstance(input_shape[1], tuple)):
            raise ShapeError("UpdateOnEvent expects (event, payload) rows")
        if input_shape[0] != ():
            raise ShapeError(f"event must be a scalar flag, got shape {input_shape[0]}")
        payload_shape = input_shape[1]
        params, inner_state = inner.init(seed, payload_shape)
        held = np.asarray(initial_output, dtype=np.float64)
        expected = inner.output_shape(payload_shape)
        if held.shape != expected:
            if held.ndim != 0:
                raise ShapeError(f"initial_output has shape {held.shape}, expected {expected}")
            held = np.full(expected, held[()])
        state = {"held": held, **{"inner/" + k: v for k, v in inner_state.items()}}
        return params, state

    def apply(params, state, row):
        event, payload = row
        if not event:
            return _out(state["held"]), state
        inner_state = {k[6:]: v for k, v in state.items() if k.startswith("inner/")}
        out, inner_state = inner.apply(params, inner_state, payload)
        held = np.asarray(out, dtype=np.float64)
        return _out(held), {"held": held, **{"inner/" + k: v for k, v in inner_state.items()}}

    return Transform(
        init, apply, lambda s: inner.output_shape(s[1]), name=f"UpdateOnEvent({inner.name})"
    )


def _running_extremum(kind: str) -> Transform:
    """Running max (or min) of ``(reset, value)`` rows, restarted on reset."""
    pick = np.fmax if kind == "max" else np.fmin

    def init(seed, input_shape):
        return {}, {"value": np.full(input_shape[1], _NAN)}

    def apply(params, state, row):
        reset, x = row
        x = np.asarray(x, dtype=np.float64)
        value = x if reset else pick(state["value"], x)
        return _out(value), {"value": value}

    return Transform(init, apply, lambda s: s[1], name=f"Running{kind.title()}")


def TrailingOHLC() -> Transform:
    """Open/high/low/close of the current segment for ``(reset, value)`` rows.

    A segment starts at the first row and at every row whose reset flag is
    true. High and low skip NaN values; close is the current value. Scalar
    values give ``[open, high, low, close]`` vectors.
    """
    opener = UpdateOnEvent(identity(), _NAN)
    high = _running_extremum("max")
    low = _running_extremum("min")
    parts = (("open/", opener), ("high/", high), ("low/", low))

    def init(seed, input_shape):
        if not (isinstance(input_shape, tuple) and len(input_shape) == 2
                and isinstance(input_shape[1], tuple)):
            raise ShapeError("TrailingOHLC expects (reset, value) rows")
        _check_array_shape(input_shape[1], "TrailingOHLC", max_rank=1)
        state = {"started": np.array(False)}
        for prefix, t in parts:
            _, s = t.init(seed, input_shape)
            state.update({prefix + k: v for k, v in s.items()})
        return {}, state

    def apply(params, state, row):
        reset, x = row
        # the first row opens a segment even without an explicit reset
        event = bool(reset) or not bool(state["started"])
        new = {"started": np.array(True)}
        outs = []
        for prefix, t in parts:
            sub = {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}
            out, sub = t.apply({}, sub, (event, x))
            outs.append(out)
            new.update({prefix + k: v for k, v in sub.items()})
        outs.append(np.asarray(x, dtype=np.float64))
        return np.stack([np.asarray(o, dtype=np.float64) for o in outs]), new

    return Transform(init, apply, lambda s: (4, *s[1]), name="TrailingOHLC")


def trailing_ohlc(values: Sequence, reset_events) -> Sequence:
    """Trailing open/high/low/close of ``values``, restarted on each reset event."""
    events = np.asarray(reset_events, dtype=bool)
    if events.shape != (len(values),):
        raise ShapeError(f"{len(values)} values but reset_events has shape {events.shape}")
    rows = [(bool(e), v) for e, v in zip(events, values.rows)]
    if not all(shape_of(v) == () for v in values.rows):
        raise ShapeError("trailing_ohlc expects scalar values")
    return unroll(TrailingOHLC(), 0, Sequence(values.timestamps, rows))
