import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impiss.history import History, HistoryError, RangeError, hermite, time_eps
from oracles import trapezoid


def jump_record(pre=2.0, post=1.0):
    """Constant ``pre`` on [0, 1], jump to ``post`` at 1, constant to 2."""
    h = History.constant(pre, 1.0, 1.0)
    h.apply_jump(1.0, [post])
    h.append_node(2.0, [post], [0.0])
    return h


def linear_record():
    return History.from_function(lambda s: np.array([s]), 0.0, 1.0, 0.1)


def test_eval_constant_history():
    h = History.constant([3.0, -1.0], 0.0, 2.0)
    for t in (-2.0, -1.3, 0.0):
        assert np.array_equal(h.eval(t), [3.0, -1.0])


def test_eval_at_jump_is_post_value():
    h = jump_record()
    assert h.eval(1.0)[0] == 1.0


def test_eval_linear_segment_exact():
    h = linear_record()
    assert abs(h.eval(-0.5)[0] + 0.5) < 1e-12
    assert abs(h.eval(-0.37)[0] + 0.37) < 1e-12


def test_eval_out_of_range_names_interval():
    h = linear_record()
    with pytest.raises(RangeError, match=r"\[-1.0, 0.0\]"):
        h.eval(0.5)
    with pytest.raises(RangeError):
        h.eval(-1.5)


def test_left_limit_at_jump_is_pre_value():
    h = jump_record()
    assert h.left_limit(1.0)[0] == 2.0


def test_left_limit_off_jump_equals_eval():
    h = History.from_function(lambda s: np.array([s * s]), 1.0, 1.0, 0.05, derivative=lambda s: np.array([2 * s]))
    assert h.left_limit(0.5)[0] == pytest.approx(0.25, abs=1e-12)
    assert np.array_equal(h.left_limit(0.5), h.eval(0.5))


def test_left_limit_cascade():
    h = History.constant(4.0, 0.0, 0.0)
    h.append_node(1.0, [4.0], [0.0])
    h.apply_jump(1.0, [2.0])
    h.append_node(2.0, [2.0], [0.0])
    h.apply_jump(2.0, [1.0])
    assert h.left_limit(2.0)[0] == 2.0
    assert h.eval(2.0)[0] == 1.0


def test_left_limit_rejects_record_start():
    h = linear_record()
    with pytest.raises(RangeError):
        h.left_limit(-1.0)


def test_sup_norm_window_linear():
    assert linear_record().sup_norm_window(0.0, 1.0) == 1.0


def test_sup_norm_window_constant():
    assert History.constant(3.0, 0.0, 1.0).sup_norm_window(0.0, 1.0) == 3.0


def test_sup_norm_window_sees_pre_jump_value():
    h = History.constant(0.5, 0.0, 1.0)
    h.append_node(0.5, [5.0], [0.0])
    h.apply_jump(0.5, [1.0])
    h.append_node(1.0, [1.0], [0.0])
    h.append_node(1.5, [0.2], [0.0])
    assert h.sup_norm_window(1.5, 1.2) == 5.0


def test_sup_norm_window_out_of_record():
    with pytest.raises(RangeError):
        linear_record().sup_norm_window(0.0, 2.0)


def test_window_integral_constant():
    h = History.constant([2.5], 0.0, 1.0)
    assert h.window_integral(0.0, 1.0)[0] == pytest.approx(2.5, abs=1e-14)


def test_window_integral_linear():
    assert linear_record().window_integral(0.0, 1.0)[0] == pytest.approx(-0.5, abs=1e-14)


def test_window_integral_sine_matches_trapezoid_oracle():
    h = History.from_function(lambda s: np.array([math.sin(s)]), math.pi, math.pi, 0.01,
                              derivative=lambda s: np.array([math.cos(s)]))
    oracle = trapezoid(np.sin, 0.0, math.pi)
    assert abs(oracle - 2.0) < 1e-8
    assert abs(h.window_integral(math.pi, math.pi)[0] - oracle) < 1e-8


def test_window_integral_splits_at_jumps():
    h = jump_record(pre=2.0, post=1.0)
    assert h.window_integral(2.0, 2.0)[0] == pytest.approx(2.0 + 1.0, abs=1e-14)


def test_window_integral_bad_tau():
    with pytest.raises(ValueError):
        linear_record().window_integral(0.0, 0.0)
    with pytest.raises(RangeError):
        linear_record().window_integral(0.0, 1.5)


def test_append_contiguous_segments():
    h = History(1, 0.0, 0.0)
    h.append_segment([0.0, 0.5, 1.0], [[0.0], [0.5], [1.0]], [[1.0]] * 3)
    h.append_segment([1.0, 2.0], [[1.0], [2.0]], [[1.0]] * 2)
    assert h.start == 0.0 and h.t_now == 2.0
    assert h.eval(1.5)[0] == pytest.approx(1.5, abs=1e-14)


def test_append_rejects_gap_and_mismatch():
    h = History.constant(1.0, 0.0, 1.0)
    with pytest.raises(HistoryError):
        h.append_segment([0.5, 1.0], [[1.0], [1.0]], [[0.0], [0.0]])
    with pytest.raises(HistoryError):
        h.append_segment([0.0, 1.0], [[3.0], [1.0]], [[0.0], [0.0]])
    with pytest.raises(HistoryError):
        h.append_node(-0.5, [1.0], [0.0])


def test_identity_jump_keeps_values():
    h = History.constant(1.5, 1.0, 1.0)
    jump = h.apply_jump(1.0, [1.5])
    assert np.array_equal(jump.pre, jump.post)
    assert np.array_equal(h.eval(1.0), h.left_limit(1.0))


def test_apply_jump_then_eval_uses_post_branch():
    h = History.constant(1.0, 1.0, 1.0)
    h.apply_jump(1.0, [3.0], [1.0])
    h.append_node(1.1, [3.1], [1.0])
    assert h.eval(1.0 + 1e-6)[0] == pytest.approx(3.0 + 1e-6, abs=1e-12)


def test_apply_jump_requires_t_now():
    h = History.constant(1.0, 1.0, 1.0)
    with pytest.raises(HistoryError):
        h.apply_jump(0.5, [2.0])


def test_jump_snapping_reads_post_value():
    h = jump_record()
    near = 1.0 - 0.5 * time_eps(1.0)
    assert h.eval(near)[0] == 1.0


def test_prune_keeps_recent_window():
    h = History.from_function(lambda s: np.array([s]), 10.0, 10.0, 0.5)
    h.prune(7.2)
    assert h.start <= 7.2
    assert h.eval(8.0)[0] == pytest.approx(8.0, abs=1e-12)
    with pytest.raises(RangeError):
        h.eval(5.0)


def test_hermite_endpoints():
    assert hermite(0.0, 2.0, 1.0, 5.0, 0.3, 0.7) == 1.0
    assert hermite(1.0, 2.0, 1.0, 5.0, 0.3, 0.7) == 5.0


# ---------------------------------------------------------------------------
# properties


def _cubic(c):
    return lambda s: np.array([c[0] + c[1] * s + c[2] * s * s + c[3] * s**3])


def _cubic_d(c):
    return lambda s: np.array([c[1] + 2 * c[2] * s + 3 * c[3] * s * s])


coef = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.tuples(coef, coef, coef, coef), st.floats(-1.9, 0.0))
def test_hermite_reproduces_cubics(c, t):
    h = History.from_function(_cubic(c), 0.0, 2.0, 0.3, derivative=_cubic_d(c))
    assert abs(h.eval(t)[0] - _cubic(c)(t)[0]) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.95, -0.05), st.floats(0.1, 1.9))
def test_window_integral_additive(m, tau):
    h = History.from_function(lambda s: np.array([np.sin(3 * s), s * s]), 0.0, 2.0, 0.05)
    t = 0.0
    a = t - tau
    m = a + (t - a) * (m + 1.0)
    whole = h.integrate(lambda s, x: x, a, t)
    parts = h.integrate(lambda s, x: x, a, m) + h.integrate(lambda s, x: x, m, t)
    assert np.max(np.abs(whole - parts)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_sup_norm_monotone_in_window(r1, r2):
    r1, r2 = min(r1, r2), max(r1, r2)
    h = jump_record(pre=2.0, post=-3.0)
    assert h.sup_norm_window(2.0, r1) <= h.sup_norm_window(2.0, r2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, 2.0))
def test_eval_equals_left_limit_off_jumps(t):
    h = jump_record()
    if abs(t - 1.0) < 1e-9:
        return
    assert np.array_equal(h.eval(t), h.left_limit(t))
