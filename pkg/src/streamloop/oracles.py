"""Brute-force reference computations.

Each function recomputes an operator's output at every step from the raw
prefix, with no state carried between steps. They are deliberately slow
(quadratic in the sequence length) and share no code with the streaming
operators; tests and the benchmark's spot checks compare against them.
"""

from __future__ import annotations

import math

import numpy as np


def ew_weights(observed: np.ndarray, t: int, alpha: float, adjust: bool, ignore_na: bool):
    """Weights of the observations at positions ``<= t`` (zero where unobserved)."""
    decay = 1.0 - alpha
    positions = np.flatnonzero(observed[: t + 1])
    w = np.zeros(t + 1)
    m = len(positions)
    if m == 0:
        return w
    if adjust:
        if ignore_na:
            ages = (m - 1) - np.arange(m)
        else:
            ages = t - positions
        w[positions] = decay ** ages.astype(float)
    else:
        ranks = np.arange(m)
        ages = (m - 1) - ranks
        vals = alpha * decay ** ages.astype(float)
        vals[0] = decay ** float(m - 1)
        w[positions] = vals
    return w


def ew_moment_at(x, y, t, alpha, adjust=True, ignore_na=False, kind="mean"):
    """Exponentially weighted mean/var/cov of the prefix ``x[:t+1]`` (and ``y``)."""
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    observed = ~(np.isnan(x) | np.isnan(y))
    if not observed[: t + 1].any():
        return math.nan
    if not adjust and not ignore_na and not observed[t]:
        return math.nan
    w = ew_weights(observed, t, alpha, adjust, ignore_na)
    idx = np.flatnonzero(w > 0) if kind != "mean" else np.flatnonzero(observed[: t + 1])
    w = w[idx]
    xs, ys = x[idx], y[idx]
    sw = w.sum()
    if sw == 0:
        return math.nan
    mx = (w * xs).sum() / sw
    if kind == "mean":
        return mx
    if observed[: t + 1].sum() < 2:
        return math.nan
    my = (w * ys).sum() / sw
    denom = sw - (w * w).sum() / sw
    if denom <= 0:
        return math.nan
    est = (w * (xs - mx) * (ys - my)).sum() / denom
    if kind == "var":
        est = max(est, 0.0)
    return est


def ew_moment(x, alpha, adjust=True, ignore_na=False, kind="mean", y=None) -> np.ndarray:
    """``ew_moment_at`` evaluated at every step of a 1-d series."""
    x = np.asarray(x, dtype=float)
    return np.array(
        [ew_moment_at(x, y, t, alpha, adjust, ignore_na, kind) for t in range(len(x))]
    )


def ew_weight_matrix(observed: np.ndarray, alpha: float, adjust: bool, ignore_na: bool):
    """Row ``t`` holds the weight of every observation ``i <= t`` at step ``t``.

    The same weights as :func:`ew_weights`, built for all steps at once.
    """
    observed = np.asarray(observed, dtype=bool)
    n = len(observed)
    decay = 1.0 - alpha
    t = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    rank = np.cumsum(observed) - 1            # rank of observation i among observed
    seen = rank[:, None]                      # rank of the newest observation at step t
    admissible = (i <= t) & observed[None, :]
    with np.errstate(under="ignore"):
        powers = decay ** np.arange(n, dtype=float)  # ages are integers in [0, n)
    if adjust and not ignore_na:
        w = powers[np.where(admissible, t - i, 0)]
    else:
        w = powers[np.where(admissible, seen - rank[None, :], 0)]
        if not adjust:
            w = np.where(rank[None, :] == 0, w, alpha * w)
    return np.where(admissible, w, 0.0)


def ew_moment_matrix(x, alpha, adjust=True, ignore_na=False, kind="mean", y=None):
    """All-steps brute force via an explicit ``T x T`` weight matrix."""
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    observed = ~(np.isnan(x) | np.isnan(y))
    w = ew_weight_matrix(observed, alpha, adjust, ignore_na)
    xs, ys = np.where(observed, x, 0.0), np.where(observed, y, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        sw = w.sum(axis=1)
        mx = (w @ xs) / sw
        if kind == "mean":
            out = mx
        else:
            # unobserved entries carry zero weight, so they drop out of the sums
            wdx = w * (xs[None, :] - mx[:, None])
            if kind == "var":
                out_num = (wdx * (xs[None, :] - mx[:, None])).sum(axis=1)
            else:
                my = (w @ ys) / sw
                out_num = (wdx * (ys[None, :] - my[:, None])).sum(axis=1)
            denom = sw - (w * w).sum(axis=1) / sw
            out = out_num / denom
            nobs = np.cumsum(observed)
            out = np.where((nobs >= 2) & (denom > 0), out, math.nan)
            if kind == "var":
                out = np.maximum(out, 0.0)
    out = np.where(np.cumsum(observed) > 0, out, math.nan)
    if not adjust and not ignore_na:
        out = np.where(observed, out, math.nan)
    return out


def buffer(x, n, t, fill=math.nan):
    x = np.asarray(x, dtype=float)
    window = list(x[max(0, t - n + 1): t + 1])
    return np.array([fill] * (n - len(window)) + window)


def lag(x, k):
    x = np.asarray(x, dtype=float)
    return np.array([x[t - k] if t >= k else math.nan for t in range(len(x))])


def diff(x, k):
    x = np.asarray(x, dtype=float)
    return np.array([x[t] - x[t - k] if t >= k else math.nan for t in range(len(x))])


def pct_change(x, k):
    x = np.asarray(x, dtype=float)
    out = []
    for t in range(len(x)):
        if t < k or x[t - k] == 0 or math.isnan(x[t - k]) or math.isnan(x[t]):
            out.append(math.nan)
            continue
        try:
            ratio = float(x[t]) / float(x[t - k])
        except OverflowError:
            ratio = math.inf
        out.append(ratio - 1.0 if math.isfinite(ratio) else math.nan)
    return np.array(out)


def rolling_mean(x, length, min_periods):
    x = np.asarray(x, dtype=float)
    out = []
    for t in range(len(x)):
        window = [v for v in x[max(0, t - length + 1): t + 1] if not math.isnan(v)]
        out.append(math.fsum(window) / len(window) if len(window) >= min_periods else math.nan)
    return np.array(out)


def update_on_event(events, payloads, inner_oracle, initial):
    """Held output of ``inner_oracle`` run on the event-selected payloads only."""
    selected = [p for e, p in zip(events, payloads) if e]
    inner_out = inner_oracle(np.array(selected, dtype=float)) if selected else []
    out, k, held = [], 0, initial
    for e in events:
        if e:
            held = inner_out[k]
            k += 1
        out.append(held)
    return np.array(out, dtype=float)


def trailing_ohlc(values, resets):
    """Per-segment recompute; a segment starts at row 0 and at every reset."""
    values = np.asarray(values, dtype=float)
    out = []
    start = 0
    for t in range(len(values)):
        if resets[t]:
            start = t
        seg = values[start: t + 1]
        out.append((seg[0], np.fmax.reduce(seg), np.fmin.reduce(seg), seg[-1]))
    return np.array(out, dtype=float)


def ffill_indices(local, secondary, latency):
    """Greatest admissible secondary index for each local step (-1 if none)."""
    out = []
    for lt in local:
        best = -1
        for i, ts in enumerate(secondary):
            if ts + latency <= lt:
                best = i
        out.append(best)
    return out


def window_claims(local, secondary, latency):
    """Secondary indices newly admissible at each local step, oldest first."""
    out = []
    prev = None
    for lt in local:
        out.append([
            i for i, ts in enumerate(secondary)
            if ts + latency <= lt and (prev is None or ts + latency > prev)
        ])
        prev = lt
    return out
