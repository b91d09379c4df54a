import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import decay_system, halving_system
from impiss import (
    DivergenceError,
    ImpulseSchedule,
    ImpulsiveSystem,
    SinusoidInput,
    ZeroInput,
    gen_periodic,
    refine_check,
    simulate,
)
from impiss.model import ExpDecayInput, ParameterError, PiecewiseConstantInput, ScheduleError
from impiss.scenarios import EXAMPLE1_PHI, example1_system


def delayed_jump_system():
    """``dx = 0``; at each impulse ``Delta x = -0.2 x(t - 0.5)``."""
    return ImpulsiveSystem(
        1, 1, lambda t, x, w: np.zeros(1), lambda k, t, x, w: -0.2 * x(-0.5), 0.5, jump_lags=(0.5,)
    )


def test_scalar_decay_matches_exponential(decay_run, e):
    assert abs(decay_run.final_state[0] - 1.0 / e) < 1e-9


def test_halving_cascade():
    traj = simulate(halving_system(), 1.0, ZeroInput(1), gen_periodic(0.0, 1.0, 3), 3.5, 0.1)
    assert [ev.post[0] for ev in traj.events] == [0.5, 0.25, 0.125]
    assert traj.final_state[0] == 0.125
    for k, ev in enumerate(traj.events, start=1):
        assert traj.left_limit(ev.t)[0] == 2.0 ** (1 - k)


def test_delayed_jump_reads_history():
    traj = simulate(delayed_jump_system(), 1.0, ZeroInput(1), ImpulseSchedule((1.0,)), 1.2, 0.1)
    assert traj.final_state[0] == pytest.approx(0.8, abs=1e-14)


def test_events_are_grid_nodes_and_pre_rows_flagged(halving_run):
    times, states, _ = halving_run.grid()
    mask = halving_run.pre_jump_mask()
    event_times = [ev.t for ev in halving_run.events]
    assert list(times[mask]) == event_times
    for ev in halving_run.events:
        rows = np.flatnonzero(times == ev.t)
        assert len(rows) == 2
        assert states[rows[0], 0] == ev.pre[0]
        assert states[rows[1], 0] == ev.post[0]


def test_grid_is_nondecreasing_and_covers_interval(halving_run):
    times, _, _ = halving_run.grid()
    assert times[0] == 0.0 and times[-1] == 5.5
    assert np.all(np.diff(times) >= 0)


def test_step_is_shrunk_to_land_on_impulses():
    traj = simulate(decay_system(), 1.0, ZeroInput(1), ImpulseSchedule((0.333,)), 1.0, 0.1)
    times, _, _ = traj.grid()
    assert 0.333 in times
    assert np.max(np.diff(times)) <= 0.1 + 1e-15


def test_zero_history_stays_zero():
    traj = simulate(example1_system(), 0.0, ZeroInput(1), gen_periodic(0.0, 2.1, 3), 7.0, 0.01)
    assert np.all(traj.grid()[1] == 0.0)


def test_divergence_is_reported():
    grow = ImpulsiveSystem(1, 1, lambda t, x, w: 50.0 * x(), lambda k, t, x, w: np.zeros(1))
    with pytest.raises(DivergenceError) as info:
        simulate(grow, 1.0, ZeroInput(1), ImpulseSchedule(()), 5.0, 0.01)
    assert 0 < info.value.t < 1.0


def test_step_larger_than_delay_rejected():
    system = ImpulsiveSystem(1, 1, lambda t, x, w: -x(-0.05), lambda k, t, x, w: np.zeros(1), 0.05, (0.05,))
    with pytest.raises(ParameterError, match="smallest flow delay"):
        simulate(system, 1.0, ZeroInput(1), ImpulseSchedule(()), 1.0, 0.1)


def test_bad_arguments_rejected(decay):
    with pytest.raises(ParameterError):
        simulate(decay, 1.0, ZeroInput(1), ImpulseSchedule(()), 0.0, 0.1)
    with pytest.raises(ParameterError):
        simulate(decay, 1.0, ZeroInput(2), ImpulseSchedule(()), 1.0, 0.1)
    with pytest.raises(ParameterError):
        simulate(decay, 1.0, ZeroInput(1), ImpulseSchedule(()), 1.0, -0.1)
    with pytest.raises(ScheduleError):
        simulate(decay, 1.0, ZeroInput(1), ImpulseSchedule((0.5, 0.4)), 1.0, 0.1)


def test_simulation_is_deterministic():
    system = example1_system()
    sched = gen_periodic(0.0, 2.1, 2)
    a = simulate(system, EXAMPLE1_PHI, ZeroInput(1), sched, 5.0, 0.01)
    b = simulate(system, EXAMPLE1_PHI, ZeroInput(1), sched, 5.0, 0.01)
    assert np.array_equal(a.grid()[1], b.grid()[1])
    assert a.initial_norm == pytest.approx(1.0)


def test_flow_input_is_sampled_from_the_right():
    # dx = w with w jumping from 0 to 1 at t = 0.5 integrates to t - 0.5
    system = ImpulsiveSystem(1, 1, lambda t, x, w: w, lambda k, t, x, w: np.zeros(1))
    w = PiecewiseConstantInput([0.0, 0.5], [[0.0], [1.0]])
    traj = simulate(system, 0.0, w, ImpulseSchedule((0.5,)), 1.0, 0.1)
    assert traj.final_state[0] == pytest.approx(0.5, abs=1e-14)


def test_refine_smooth_order_near_four():
    system = ImpulsiveSystem(1, 1, lambda t, x, w: -x() + w, lambda k, t, x, w: np.zeros(1))
    table = refine_check(system, 1.0, SinusoidInput(1.0, 3.0), ImpulseSchedule(()), 2.0, 0.1)
    assert 3.5 <= table.order <= 4.5
    assert table.monotone


def test_refine_cascade_is_exact():
    table = refine_check(halving_system(), 1.0, ZeroInput(1), gen_periodic(0.0, 1.0, 3), 3.5, 0.1)
    assert table.differences == (0.0, 0.0)
    assert math.isnan(table.order)


def test_refine_example1_converges():
    table = refine_check(example1_system(), EXAMPLE1_PHI, ExpDecayInput(5.0, 1.0), gen_periodic(0.0, 2.1, 2), 5.0, 0.01)
    assert table.order >= 1.0
    assert table.monotone


def test_flow_evaluation_count_is_recorded(decay_run):
    # four stages per step plus one derivative per node
    assert decay_run.flow_evals > 4 * 100


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-5.0, 5.0))
def test_linear_scaling_of_solutions(rate, scale):
    system = decay_system(rate)
    base = simulate(system, 1.0, ZeroInput(1), ImpulseSchedule(()), 1.0, 0.05)
    scaled = simulate(system, scale, ZeroInput(1), ImpulseSchedule(()), 1.0, 0.05)
    assert scaled.final_state[0] == pytest.approx(scale * base.final_state[0], rel=1e-12, abs=1e-300)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 6), st.floats(0.3, 1.0))
def test_halving_count_law(count, delta):
    sched = gen_periodic(0.0, delta, count)
    traj = simulate(halving_system(), 1.0, ZeroInput(1), sched, delta * count + 0.1, 0.1)
    assert traj.final_state[0] == 2.0 ** -count
