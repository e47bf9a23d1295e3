import numpy as np
import pytest

from simulstream.actions import (
    Action,
    consumed_before_write,
    decode_trace,
    encode_trace,
    trace_from_consumption,
    validate_trace,
    wait_k_consumption,
    wait_k_mask,
    wait_k_trace,
)

R, W = Action.READ, Action.WRITE


def test_wait_1_alternates():
    trace = wait_k_trace(1, 3, 3)
    assert trace == [R, W, R, W, R, W]
    assert consumed_before_write(trace) == [1, 2, 3]


def test_wait_2_hand_unroll():
    trace = wait_k_trace(2, 4, 4)
    assert encode_trace(trace) == "RRWRWRWW"
    assert consumed_before_write(trace) == [2, 3, 4, 4]


def test_wait_k_beyond_source_is_offline():
    trace = wait_k_trace(10, 4, 3)
    assert encode_trace(trace) == "RRRRWWW"
    assert consumed_before_write(trace) == [4, 4, 4]


def test_wait_k_counts_always_complete(rng):
    for _ in range(200):
        k = int(rng.integers(1, 12))
        m = int(rng.integers(1, 12))
        n = int(rng.integers(1, 12))
        trace = wait_k_trace(k, m, n)
        assert validate_trace(trace, m, n).ok
        g = consumed_before_write(trace)
        assert g == [wait_k_consumption(k, i, m) for i in range(1, n + 1)]


def test_mask_matches_schedule(rng):
    for _ in range(100):
        k = int(rng.integers(1, 10))
        m = int(rng.integers(1, 10))
        n = int(rng.integers(1, 10))
        mask = wait_k_mask(k, n, m)
        widths = mask.sum(axis=1)
        g = consumed_before_write(wait_k_trace(k, m, n))
        assert list(widths) == g
        # prefix structure: every row is a contiguous prefix of columns
        for row in mask:
            on = np.flatnonzero(row)
            assert len(on) == 0 or (on[0] == 0 and on[-1] == len(on) - 1)


def test_mask_all_true_when_k_reaches_source():
    assert wait_k_mask(5, 4, 5).all()


def test_validate_trace_errors():
    assert not validate_trace([], 1, 1).ok
    assert not validate_trace([W, R], 1, 1).ok
    assert not validate_trace([R, R], 1, 1).ok
    assert validate_trace([R, W, W], 1, 2).ok
    assert not validate_trace([R, W], 2, 2).ok


def test_trace_from_consumption_round_trip(rng):
    for _ in range(100):
        m = int(rng.integers(1, 9))
        n = int(rng.integers(1, 9))
        g = sorted(int(x) for x in rng.integers(1, m + 1, size=n))
        trace = trace_from_consumption(g, m)
        assert validate_trace(trace, m, n).ok
        assert consumed_before_write(trace) == g


def test_trace_from_consumption_rejects_bad_input():
    with pytest.raises(ValueError):
        trace_from_consumption([2, 1], 3)
    with pytest.raises(ValueError):
        trace_from_consumption([4], 3)
    with pytest.raises(ValueError):
        trace_from_consumption([0], 3)


def test_encode_decode_round_trip():
    trace = wait_k_trace(2, 5, 4)
    assert decode_trace(encode_trace(trace)) == trace
    with pytest.raises(ValueError):
        decode_trace("RWX")
