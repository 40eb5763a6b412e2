import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamloop import oracles
from streamloop.core import Sequence, chain, identity, unroll
from streamloop.exceptions import ParameterError, ShapeError
from streamloop.modules import (
    EWMA,
    Buffer,
    Diff,
    EWMCov,
    EWMVar,
    EwSpec,
    Lag,
    PctChange,
    RollingMean,
    TrailingOHLC,
    UpdateOnEvent,
    WindowSpec,
    trailing_ohlc,
)

nan = math.nan


def run(t, xs):
    return unroll(t, 0, Sequence.from_values(xs)).values()


def run_rows(t, rows):
    return unroll(t, 0, Sequence(np.arange(len(rows)), rows)).values()


finite = st.floats(-1e3, 1e3)
maybe_nan = finite | st.just(nan)


# -- Buffer / Lag / Diff / PctChange -----------------------------------------


def test_buffer_pads_oldest_end():
    np.testing.assert_array_equal(run(Buffer(3), [7.0, 8.0]), [[nan, nan, 7.0], [nan, 7.0, 8.0]])


def test_buffer_one_is_identity():
    np.testing.assert_array_equal(run(Buffer(1), [1.0, 2.0]).ravel(), [1.0, 2.0])


def test_buffer_keeps_last_n():
    np.testing.assert_array_equal(run(Buffer(2), [1.0, 2.0, 3.0])[2], [2.0, 3.0])


def test_buffer_vector_rows():
    out = run(Buffer(2), [[1.0, 10.0], [2.0, 20.0]])
    assert out.shape == (2, 2, 2)
    np.testing.assert_array_equal(out[1], [[1.0, 10.0], [2.0, 20.0]])


@pytest.mark.parametrize("factory", [Buffer, Lag, Diff, PctChange])
def test_zero_parameter_rejected(factory):
    with pytest.raises(ParameterError):
        factory(0)


def test_lag():
    np.testing.assert_array_equal(run(Lag(1), [1.0, 2.0, 3.0]), [nan, 1.0, 2.0])
    np.testing.assert_array_equal(run(Lag(2), [5.0, 6.0, 7.0]), [nan, nan, 5.0])


def test_lag_matches_buffer_head():
    xs = [3.0, 1.0, 4.0, 1.0, 5.0]
    np.testing.assert_array_equal(run(Lag(1), xs)[1:], run(Buffer(2), xs)[1:, 0])


def test_diff():
    np.testing.assert_array_equal(run(Diff(1), [1.0, 3.0, 6.0]), [nan, 2.0, 3.0])
    np.testing.assert_array_equal(run(Diff(1), [4.0] * 4), [nan, 0.0, 0.0, 0.0])
    # direct subtraction: 4 - 1, 8 - 2
    np.testing.assert_array_equal(run(Diff(2), [1.0, 2.0, 4.0, 8.0]), [nan, nan, 3.0, 6.0])


def test_pct_change():
    np.testing.assert_allclose(run(PctChange(1), [100.0, 110.0]), [nan, 110.0 / 100.0 - 1.0])
    np.testing.assert_array_equal(run(PctChange(1), [3.5, 3.5]), [nan, 0.0])
    np.testing.assert_array_equal(run(PctChange(1), [0.0, 5.0]), [nan, nan])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=2, max_size=2),
       st.lists(finite, min_size=1, max_size=30))
def test_lag_composition(ks, xs):
    j, k = ks
    a = run(chain(Lag(j), Lag(k)), xs)
    b = run(Lag(j + k), xs)
    both = ~np.isnan(a) & ~np.isnan(b)
    np.testing.assert_array_equal(a[both], b[both])
    np.testing.assert_array_equal(np.isnan(a), np.isnan(b))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.lists(maybe_nan, min_size=1, max_size=30))
def test_shift_operators_match_brute_force(k, xs):
    np.testing.assert_array_equal(run(Lag(k), xs), oracles.lag(xs, k))
    np.testing.assert_array_equal(run(Diff(k), xs), oracles.diff(xs, k))
    np.testing.assert_array_equal(run(PctChange(k), xs), oracles.pct_change(xs, k))
    for t in range(len(xs)):
        np.testing.assert_array_equal(run(Buffer(k), xs)[t], oracles.buffer(xs, k, t))


# -- RollingMean --------------------------------------------------------------


def test_rolling_mean_full_windows():
    # window means: (1+3)/2, (3+5)/2
    np.testing.assert_array_equal(run(RollingMean(WindowSpec(2, 2)), [1.0, 3.0, 5.0]), [nan, 2.0, 4.0])


def test_rolling_mean_partial_windows():
    np.testing.assert_array_equal(run(RollingMean(2, min_periods=1), [1.0, 3.0, 5.0]), [1.0, 2.0, 4.0])


def test_rolling_mean_constant():
    out = run(RollingMean(3), [2.5] * 6)
    np.testing.assert_array_equal(out, [nan, nan, 2.5, 2.5, 2.5, 2.5])


def test_rolling_mean_default_min_periods_is_length():
    assert WindowSpec(4).min_periods == 4


@pytest.mark.parametrize("length,minp", [(0, None), (2, 3), (2, 0)])
def test_window_spec_validation(length, minp):
    with pytest.raises(ParameterError):
        WindowSpec(length, minp)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.data(), st.lists(maybe_nan, min_size=1, max_size=30))
def test_rolling_mean_matches_brute_force(length, data, xs):
    minp = data.draw(st.integers(1, length))
    np.testing.assert_array_equal(run(RollingMean(length, minp), xs),
                                  oracles.rolling_mean(xs, length, minp))


def test_rolling_mean_columns_independent():
    x = np.array([[1.0, nan], [2.0, 4.0], [nan, 6.0]])
    out = run(RollingMean(2, 1), x)
    for j in range(2):
        np.testing.assert_array_equal(out[:, j], oracles.rolling_mean(x[:, j], 2, 1))


# -- exponentially weighted moments ------------------------------------------


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5, "x"])
def test_alpha_validation(alpha):
    with pytest.raises(ParameterError):
        EwSpec(alpha)


def test_ewma_example():
    np.testing.assert_allclose(run(EWMA(0.5), [1.0, 2.0]), [1.0, 2.5 / 1.5], rtol=0, atol=1e-15)


@pytest.mark.parametrize("adjust", [True, False])
def test_ewma_alpha_one_is_identity(adjust):
    xs = [0.1, 0.3, -7.25, 1e9]
    np.testing.assert_array_equal(run(EWMA(1.0, adjust), xs), xs)


@pytest.mark.parametrize("alpha", [0.05, 0.5, 1.0])
@pytest.mark.parametrize("adjust", [True, False])
def test_ewma_constant(alpha, adjust):
    np.testing.assert_array_equal(run(EWMA(alpha, adjust), [0.3] * 20), [0.3] * 20)


def test_ewmvar_examples():
    out = run(EWMVar(0.5), [0.0, 1.0])
    assert math.isnan(out[0])
    # w = [0.5, 1], mean 2/3, numerator 1/3, denominator 1.5 - 1.25/1.5 = 2/3
    assert out[1] == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_array_equal(run(EWMVar(0.3), [2.0] * 5)[1:], 0.0)
    assert math.isnan(run(EWMVar(0.3), [2.0])[0])


def test_ewmcov_example():
    out = run_rows(EWMCov(0.5), [(0.0, 0.0), (1.0, 2.0)])
    # w = [0.5, 1]; mx = 2/3, my = 4/3; numerator 2/3; denominator 2/3
    assert out[1] == pytest.approx(1.0, abs=1e-15)


def test_ewmcov_needs_pairs():
    with pytest.raises(ShapeError):
        run(EWMCov(0.5), [1.0, 2.0])


def test_ew_nan_until_first_observation():
    out = run(EWMA(0.5), [nan, nan, 3.0, 4.0])
    assert np.isnan(out[:2]).all() and out[2] == 3.0


def test_adjust_false_gap_policy():
    xs = [1.0, nan, 3.0]
    held = run(EWMA(0.5, adjust=False, ignore_na=True), xs)
    np.testing.assert_array_equal(held, [1.0, 1.0, 2.0])
    gap = run(EWMA(0.5, adjust=False, ignore_na=False), xs)
    np.testing.assert_array_equal(gap, [1.0, nan, 2.0])


def test_adjust_true_ignore_na_weighting():
    # positions: weights (1-a)^2 for x0 and 1 for x2 when not ignoring gaps
    xs = [1.0, nan, 3.0]
    pos = run(EWMA(0.5, adjust=True, ignore_na=False), xs)
    assert pos[2] == pytest.approx((0.25 * 1.0 + 3.0) / 1.25, abs=1e-15)
    rank = run(EWMA(0.5, adjust=True, ignore_na=True), xs)
    assert rank[2] == pytest.approx((0.5 * 1.0 + 3.0) / 1.5, abs=1e-15)
    assert pos[1] == 1.0 and rank[1] == 1.0


ew_configs = st.tuples(st.sampled_from([0.05, 0.1, 0.5, 0.9, 0.99]), st.booleans(), st.booleans())


@settings(max_examples=60, deadline=None)
@given(ew_configs, st.lists(maybe_nan, min_size=1, max_size=40))
def test_ew_mean_var_match_oracle(cfg, xs):
    alpha, adjust, ignore_na = cfg
    for factory, kind in ((EWMA, "mean"), (EWMVar, "var")):
        got = run(factory(alpha, adjust, ignore_na), xs)
        want = oracles.ew_moment(xs, alpha, adjust, ignore_na, kind)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-9 * max(1.0, np.nanmax(np.abs(xs), initial=1) ** 2))


@settings(max_examples=40, deadline=None)
@given(ew_configs, st.lists(st.tuples(maybe_nan, maybe_nan), min_size=1, max_size=40))
def test_ew_cov_matches_oracle(cfg, pairs):
    alpha, adjust, ignore_na = cfg
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    got = run_rows(EWMCov(alpha, adjust, ignore_na), pairs)
    want = oracles.ew_moment(x, alpha, adjust, ignore_na, "cov", y=y)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-9 * 1e6)


@settings(max_examples=40, deadline=None)
@given(ew_configs, st.lists(finite, min_size=1, max_size=40))
def test_ewmcov_self_is_ewmvar(cfg, xs):
    alpha, adjust, ignore_na = cfg
    cov = run_rows(EWMCov(alpha, adjust, ignore_na), [(x, x) for x in xs])
    var = run(EWMVar(alpha, adjust, ignore_na), xs)
    np.testing.assert_array_equal(cov, var)
    neg = run_rows(EWMCov(alpha, adjust, ignore_na), [(x, -x) for x in xs])
    np.testing.assert_allclose(neg, -var, rtol=1e-12, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(ew_configs, st.lists(maybe_nan, min_size=1, max_size=40))
def test_ewma_envelope_and_nonnegative_variance(cfg, xs):
    alpha, adjust, ignore_na = cfg
    mean = run(EWMA(alpha, adjust, ignore_na), xs)
    arr = np.array(xs)
    if not np.isnan(arr).all():
        lo, hi = np.nanmin(arr), np.nanmax(arr)
        m = mean[~np.isnan(mean)]
        assert ((m >= lo) & (m <= hi)).all()
    var = run(EWMVar(alpha, adjust, ignore_na), xs)
    assert (var[~np.isnan(var)] >= 0).all()


def test_ew_nan_skipped_entirely_with_ignore_na():
    # a gap changes nothing about later outputs when ignore_na is set
    with_gap = run(EWMVar(0.3, ignore_na=True), [1.0, 2.0, nan, 4.0, 5.0])
    without = run(EWMVar(0.3, ignore_na=True), [1.0, 2.0, 4.0, 5.0])
    np.testing.assert_array_equal(with_gap[[0, 1, 3, 4]], without)


def test_ew_elementwise_over_vectors():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(30, 4))
    x[rng.random(x.shape) < 0.2] = nan
    for factory in (EWMA, EWMVar):
        t = factory(0.2, True, False)
        cols = np.column_stack([run(t, x[:, j]) for j in range(4)])
        np.testing.assert_array_equal(run(t, x), cols)


# -- UpdateOnEvent / OHLC -----------------------------------------------------


def test_update_on_event_holds_output():
    rows = [(True, 1.0), (False, 2.0), (True, 3.0)]
    np.testing.assert_array_equal(run_rows(UpdateOnEvent(identity()), rows), [1.0, 1.0, 3.0])


def test_update_on_event_never_fires():
    rows = [(False, v) for v in (1.0, 2.0, 3.0)]
    np.testing.assert_array_equal(run_rows(UpdateOnEvent(identity(), -1.0), rows), [-1.0] * 3)


def test_update_on_event_always_fires():
    xs = [1.0, 5.0, 2.0, 8.0]
    rows = [(True, v) for v in xs]
    np.testing.assert_array_equal(run_rows(UpdateOnEvent(EWMA(0.4)), rows), run(EWMA(0.4), xs))


def test_update_on_event_freezes_inner_state():
    events = [True, False, False, True, True, False, True]
    xs = [1.0, 100.0, -50.0, 2.0, 3.0, 9.0, 4.0]
    got = run_rows(UpdateOnEvent(EWMA(0.5)), list(zip(events, xs)))
    want = oracles.update_on_event(events, xs, lambda v: oracles.ew_moment(v, 0.5), nan)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_update_on_event_shape_checks():
    with pytest.raises(ShapeError):
        run(UpdateOnEvent(identity()), [1.0, 2.0])
    with pytest.raises(ShapeError):
        run_rows(UpdateOnEvent(identity(), np.zeros(3)), [(True, np.zeros(2))])


def test_trailing_ohlc_example():
    out = trailing_ohlc(Sequence.from_values([3.0, 5.0, 2.0]), [True, False, False]).values()
    np.testing.assert_array_equal(out, [[3, 3, 3, 3], [3, 5, 3, 5], [3, 5, 2, 2]])


def test_trailing_ohlc_reset_every_step():
    xs = [4.0, 1.0, 7.0]
    out = trailing_ohlc(Sequence.from_values(xs), [True] * 3).values()
    np.testing.assert_array_equal(out, np.repeat(np.array(xs)[:, None], 4, axis=1))


def test_trailing_ohlc_monotone_segment():
    xs = [1.0, 2.0, 3.0, 4.0]
    out = trailing_ohlc(Sequence.from_values(xs), [True, False, False, False]).values()
    np.testing.assert_array_equal(out[:, 2], 1.0)
    np.testing.assert_array_equal(out[:, 1], out[:, 3])


def test_trailing_ohlc_alignment():
    with pytest.raises(ShapeError):
        trailing_ohlc(Sequence.from_values([1.0, 2.0]), [True])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.booleans(), maybe_nan), min_size=1, max_size=40))
def test_trailing_ohlc_matches_segments(rows):
    resets = [r for r, _ in rows]
    xs = [v for _, v in rows]
    got = trailing_ohlc(Sequence.from_values(xs), resets).values()
    np.testing.assert_array_equal(got, oracles.trailing_ohlc(xs, resets))


def test_trailing_ohlc_transform_vector_rows():
    rows = [(True, np.array([1.0, 5.0])), (False, np.array([3.0, 2.0]))]
    out = run_rows(TrailingOHLC(), rows)
    assert out.shape == (2, 4, 2)
    np.testing.assert_array_equal(out[1], [[1, 5], [3, 5], [1, 2], [3, 2]])
