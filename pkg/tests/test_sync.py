import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamloop import oracles
from streamloop.core import Sequence, unroll
from streamloop.exceptions import ConsistencyError, OrderingError, ParameterError
from streamloop.modules import EWMA
from streamloop.sync import (
    ForwardFill,
    Schedule,
    StreamSpec,
    Window,
    execute,
    parse_mode,
    synchronized_unroll,
    trace,
)


def ffill_idx(sched):
    return [int(i) if i >= 0 else None for i in sched.start]


def test_trace_ffill_example():
    s = trace([1, 2, 3, 4], [StreamSpec("a", [1, 3])])
    assert ffill_idx(s["a"]) == [0, 0, 1, 1]


def test_trace_ffill_all_future():
    s = trace([1, 2], [StreamSpec("a", [3])])
    assert ffill_idx(s["a"]) == [None, None]
    assert list(s["a"].pad) == [1, 1]


def test_trace_window_example():
    s = trace([10, 20], [StreamSpec("a", [5, 12, 15, 22], mode=Window(2))])["a"]
    assert s.indices(0) == [0] and s.pad[0] == 1
    assert s.indices(1) == [1, 2] and s.pad[1] == 0
    assert 3 not in s.indices(0) + s.indices(1)


def test_trace_latency_delays_visibility():
    s = trace([1, 2, 3, 4], [StreamSpec("a", [1, 3], latency=1)])
    assert ffill_idx(s["a"]) == [None, 0, 0, 1]


def test_window_overflow_keeps_newest():
    s = trace([10], [StreamSpec("a", [1, 2, 3, 4, 5], mode=Window(2))])["a"]
    assert s.indices(0) == [3, 4]
    assert s.overflow[0] == 3


@pytest.mark.parametrize("local", [[2, 1], [1, 1]])
def test_trace_rejects_bad_local(local):
    with pytest.raises(OrderingError):
        trace(local, [StreamSpec("a", [0])])


def test_secondary_must_be_sorted():
    with pytest.raises(OrderingError):
        StreamSpec("a", [3, 1])


def test_duplicate_secondary_timestamps_keep_order():
    s = trace([5], [StreamSpec("a", [1, 1, 1], mode=Window(3))])["a"]
    assert s.indices(0) == [0, 1, 2]
    assert ffill_idx(trace([5], [StreamSpec("b", [1, 1])])["b"]) == [1]


def test_bad_parameters():
    with pytest.raises(ParameterError):
        Window(0)
    with pytest.raises(ParameterError):
        StreamSpec("a", [1], latency=-1)
    with pytest.raises(ParameterError):
        parse_mode("window:x")
    with pytest.raises(ParameterError):
        parse_mode("nearest")
    with pytest.raises(ParameterError):
        trace([1], [StreamSpec("a", [0]), StreamSpec("a", [0])])


def test_parse_mode():
    assert parse_mode("ffill") == ForwardFill()
    assert parse_mode("window:3") == Window(3)
    assert str(Window(3)) == "window:3"


def test_schedule_csv_round_trip(tmp_path):
    s = trace([10, 20, 30], [StreamSpec("a", [5, 12, 15, 22]),
                             StreamSpec("b", [5, 12, 15, 22], latency=3, mode=Window(2))])
    text = s.to_csv(tmp_path / "s.csv")
    assert text.splitlines()[0] == "step,stream,kind,start,stop,pad,overflow"
    back = Schedule.from_csv(tmp_path / "s.csv")
    assert list(back.records()) == list(s.records())
    assert back["b"].buffer_size == 2
    assert Schedule.from_csv(text).names == ("a", "b")


def test_schedule_csv_rejects_holes():
    text = "step,stream,kind,start,stop,pad,overflow\n1,a,ffill,0,1,0,0\n"
    with pytest.raises(ConsistencyError):
        Schedule.from_csv(text)


def test_execute_aligned_ffill_is_zip():
    local = Sequence([1, 2, 3], [[1.0], [2.0], [3.0]], ["x"])
    sec = Sequence([1, 2, 3], [[10.0], [20.0], [30.0]], ["y"])
    s = trace(local.timestamps, [StreamSpec.for_sequence("s", sec)])
    out = execute(s, local, {"s": sec})
    np.testing.assert_array_equal(out.values(), [[1, 10], [2, 20], [3, 30]])
    assert out.columns == ("x", "s.y")


def test_execute_none_index_is_nan():
    local = Sequence([1, 2], [[1.0], [2.0]], ["x"])
    sec = Sequence([2], [[7.0]], ["y"])
    out = execute(trace(local.timestamps, [StreamSpec.for_sequence("s", sec)]), local, {"s": sec})
    np.testing.assert_array_equal(out.values(), [[1.0, np.nan], [2.0, 7.0]])


def test_execute_window_example():
    local = Sequence([10, 20], [[0.0], [0.0]], ["x"])
    sec = Sequence([5, 12, 15, 22], [[5.0], [12.0], [15.0], [22.0]], ["v"])
    s = trace(local.timestamps, [StreamSpec.for_sequence("s", sec, "window:2")])
    out = execute(s, local, {"s": sec})
    np.testing.assert_array_equal(out.values(), [[0, np.nan, 5], [0, 12, 15]])
    assert out.columns == ("x", "s.v[0]", "s.v[1]")


def test_execute_consistency_errors():
    local = Sequence([1, 2], [[1.0], [2.0]])
    sec = Sequence([1, 2], [[1.0], [2.0]])
    s = trace([1, 2], [StreamSpec.for_sequence("s", sec)])
    with pytest.raises(ConsistencyError):
        execute(s, Sequence([1], [[1.0]]), {"s": sec})
    with pytest.raises(ConsistencyError):
        execute(s, local, {})
    with pytest.raises(ConsistencyError):
        execute(s, local, {"s": Sequence([1], [[1.0]])})


def test_trace_ignores_payloads():
    local = Sequence([1, 2, 3], [[0.0]] * 3)
    a = Sequence([1, 3], [[1.0], [2.0]])
    b = Sequence([1, 3], [[-5.0], [np.nan]])
    sa = trace(local.timestamps, [StreamSpec.for_sequence("s", a)])
    sb = trace(local.timestamps, [StreamSpec.for_sequence("s", b)])
    assert list(sa.records()) == list(sb.records())


def test_synchronized_unroll_without_streams():
    local = Sequence.from_values([1.0, 2.0, 4.0])
    a = synchronized_unroll(EWMA(0.3), 0, local, [])
    np.testing.assert_array_equal(a.values(), unroll(EWMA(0.3), 0, local).values())


def test_synchronized_unroll_rejects_mismatched_spec():
    local = Sequence.from_values([1.0, 2.0])
    sec = Sequence([0, 1], [1.0, 2.0])
    with pytest.raises(ConsistencyError):
        synchronized_unroll(EWMA(0.3), 0, local, [(StreamSpec("s", [0, 5]), sec)])


def test_dual_frequency_ewma_matches_offline():
    # "ground" every 10 ns, "air" every 3 ns with latency 2: ffill onto ground
    rng = np.random.default_rng(3)
    ground_ts = np.arange(0, 1000, 10)
    air_ts = np.arange(1, 1000, 3)
    ground = Sequence(ground_ts, list(rng.normal(size=(len(ground_ts), 1))), ["g"])
    air = Sequence(air_ts, list(rng.normal(size=(len(air_ts), 1))), ["a"])
    spec = StreamSpec.for_sequence("air", air, latency=2)
    out = synchronized_unroll(EWMA(0.2), 0, ground, [(spec, air)]).values()

    # offline merge by brute-force scan, then the weighted oracle per column
    idx = oracles.ffill_indices(ground_ts, air_ts, 2)
    air_vals = air.values()[:, 0]
    merged_air = np.array([air_vals[i] if i >= 0 else np.nan for i in idx])
    np.testing.assert_allclose(out[:, 0], oracles.ew_moment(ground.values()[:, 0], 0.2),
                               rtol=0, atol=1e-9)
    np.testing.assert_allclose(out[:, 1], oracles.ew_moment(merged_air, 0.2), rtol=0, atol=1e-9)


def test_permuting_streams_permutes_slots():
    local = Sequence([5, 10, 15], [[0.0]] * 3, ["x"])
    a = Sequence([1, 6, 11], [[1.0], [2.0], [3.0]], ["v"])
    b = Sequence([2, 3, 12, 14], [[4.0], [5.0], [6.0], [7.0]], ["v"])
    sa, sb = StreamSpec.for_sequence("a", a), StreamSpec.for_sequence("b", b, "window:2")
    ab = synchronized_unroll(EWMA(0.5), 0, local, [(sa, a), (sb, b)])
    ba = synchronized_unroll(EWMA(0.5), 0, local, [(sb, b), (sa, a)])
    pos_ab = {c: i for i, c in enumerate(ab.columns)}
    pos_ba = {c: i for i, c in enumerate(ba.columns)}
    assert set(pos_ab) == set(pos_ba)
    for c in pos_ab:
        np.testing.assert_array_equal(ab.values()[:, pos_ab[c]], ba.values()[:, pos_ba[c]])


timestamps = st.lists(st.integers(0, 60), max_size=25).map(sorted)
strict = st.lists(st.integers(0, 60), min_size=1, max_size=20, unique=True).map(sorted)


@settings(max_examples=200, deadline=None)
@given(strict, timestamps, st.integers(0, 10), st.integers(1, 4))
def test_trace_matches_brute_force(local, secondary, latency, n):
    sched = trace(local, [StreamSpec("f", secondary, latency),
                          StreamSpec("w", secondary, latency, Window(n))])
    f, w = sched["f"], sched["w"]
    assert [int(i) for i in f.start] == oracles.ffill_indices(local, secondary, latency)
    claims = oracles.window_claims(local, secondary, latency)
    claimed = []
    for t, lt in enumerate(local):
        got = w.indices(t)
        assert all(secondary[i] + latency <= lt for i in got)
        # truncation drops only the oldest claims
        assert got == claims[t][-n:]
        assert w.pad[t] == n - len(got)
        assert w.overflow[t] == len(claims[t]) - len(got)
        claimed += claims[t]
    # every admissible event claimed exactly once
    admissible = [i for i, ts in enumerate(secondary) if ts + latency <= local[-1]]
    assert claimed == admissible
