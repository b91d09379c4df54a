import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import decay_system, halving_system
from impiss import History, ImpulseSchedule, ImpulsiveSystem, ZeroInput, gen_periodic, simulate
from impiss.lyapunov import (
    ConfigurationError,
    ContractError,
    LyapunovPair,
    check_flow_condition,
    check_functional_bound,
    check_jump_condition,
    check_sandwich,
    dini_estimate,
    eval_V,
    is_class_kinf,
    series,
)
from impiss.model import ExpDecayInput
from impiss.scenarios import EXAMPLE1_PHI, Example1Params, example1_lyapunov, example1_system
from oracles import trapezoid


def square(t, x):
    return float(np.dot(x, x))


def quadratic_pair(window=0.0, kappa=None):
    V2 = None
    if window > 0:
        V2 = lambda t, view: view.integrate(lambda s, x: np.sum(x * x, axis=1), window)  # noqa: E731
    return LyapunovPair(
        V1=square,
        V2=V2,
        window=window,
        alpha1=lambda s: s * s,
        alpha2=lambda s: s * s,
        kappa=kappa,
    )


def delayed_decay():
    """``dx = -x + 0.2 x(t - 1)`` with delay bound 1."""
    return ImpulsiveSystem(1, 1, lambda t, x, w: -x() + 0.2 * x(-1.0), lambda k, t, x, w: np.zeros(1), 1.0, (1.0,))


def test_eval_V_without_functional():
    traj = simulate(decay_system(), 5.0, ZeroInput(1), ImpulseSchedule(()), 1.0, 0.01)
    assert eval_V(quadratic_pair(), traj, 0.0) == (25.0, 25.0, 0.0)


def test_example1_V_at_zero_state():
    traj = simulate(example1_system(), 0.0, ZeroInput(1), ImpulseSchedule(()), 2.0, 0.01)
    assert eval_V(example1_lyapunov(), traj, 1.5) == (0.0, 0.0, 0.0)


def test_example1_V2_of_constant_history():
    # a * int_{-1}^0 (6 + 5 s) ds with sat(1)^2 = 1
    traj = simulate(example1_system(), EXAMPLE1_PHI, ZeroInput(1), ImpulseSchedule(()), 1.0, 0.01)
    _, v1, v2 = eval_V(example1_lyapunov(), traj, 0.0)
    assert v1 == 1.0
    assert v2 == pytest.approx(0.2 * 3.5, abs=1e-12)


def test_V2_of_sine_history_matches_quadrature_oracle():
    h = History.from_function(lambda s: np.array([math.sin(3 * s)]), 0.0, 1.0, 0.005,
                              derivative=lambda s: np.array([3 * math.cos(3 * s)]))
    traj = simulate(delayed_decay(), h, ZeroInput(1), ImpulseSchedule(()), 0.5, 0.005)
    oracle = trapezoid(lambda s: np.sin(3 * s) ** 2, -1.0, 0.0)
    assert eval_V(quadratic_pair(1.0), traj, 0.0)[2] == pytest.approx(oracle, abs=1e-8)


def test_dini_of_square_under_decay(decay_run):
    assert dini_estimate(quadratic_pair(), decay_run, 0.0, 1e-4) == pytest.approx(-2.0, abs=1e-3)


def test_dini_rejects_interior_impulse(halving_run):
    with pytest.raises(ContractError):
        dini_estimate(quadratic_pair(), halving_run, 0.95, 0.1)


def test_dini_uses_left_limit_at_impulse(halving_run):
    assert dini_estimate(quadratic_pair(), halving_run, 0.9, 0.1) == pytest.approx(0.0, abs=1e-12)


def test_flow_condition_rate_boundary(decay_run):
    pair = quadratic_pair()
    assert check_flow_condition(pair, decay_run, 1.9).ok
    report = check_flow_condition(pair, decay_run, 2.1)
    assert not report.ok and report.max_excess > 0
    assert report.samples == 100


def test_flow_condition_growth_mode():
    grow = ImpulsiveSystem(1, 1, lambda t, x, w: 0.5 * x(), lambda k, t, x, w: np.zeros(1))
    traj = simulate(grow, 1.0, ZeroInput(1), ImpulseSchedule(()), 1.0, 0.01)
    assert check_flow_condition(quadratic_pair(), traj, 1.1, mode="growth").ok
    assert not check_flow_condition(quadratic_pair(), traj, 0.9, mode="growth").ok
    with pytest.raises(ValueError):
        check_flow_condition(quadratic_pair(), traj, 1.0, mode="sideways")


def test_flow_condition_skips_jump_rows(halving_run):
    assert check_flow_condition(quadratic_pair(), halving_run, 0.0).ok


def test_jump_condition_halving(halving_run):
    pair = quadratic_pair()
    ok = check_jump_condition(pair, halving_run, 0.25, 0.0)
    assert ok.ok and len(ok.excess) == 5
    assert max(ok.excess) == pytest.approx(0.0, abs=1e-15)
    bad = check_jump_condition(pair, halving_run, 0.2, 0.0)
    assert bad.violations == 5


def test_jump_condition_window_term_absorbs_growth():
    doubling = ImpulsiveSystem(1, 1, lambda t, x, w: np.zeros(1), lambda k, t, x, w: x(), 0.5)
    traj = simulate(doubling, 1.0, ZeroInput(1), ImpulseSchedule((1.0,)), 1.5, 0.1)
    pair = quadratic_pair()
    assert not check_jump_condition(pair, traj, 1.0, 0.0).ok
    assert check_jump_condition(pair, traj, 1.0, 3.0).ok
    assert check_jump_condition(pair, traj, 1.0, 3.0, mode="window").ok


def test_functional_bound_for_integral_of_square():
    traj = simulate(delayed_decay(), 1.0, ZeroInput(1), ImpulseSchedule(()), 3.0, 0.01)
    assert check_functional_bound(quadratic_pair(1.0, kappa=1.0), traj).ok
    assert not check_functional_bound(quadratic_pair(1.0, kappa=0.5), traj).ok


def test_functional_bound_needs_kappa():
    traj = simulate(delayed_decay(), 1.0, ZeroInput(1), ImpulseSchedule(()), 1.0, 0.01)
    with pytest.raises(ConfigurationError):
        check_functional_bound(quadratic_pair(1.0), traj)


def test_series_marks_pre_jump_rows(halving_run):
    data = series(quadratic_pair(), halving_run)
    assert data.pre.sum() == 5
    assert np.all(data.V[data.pre] == 4.0 * data.V[np.flatnonzero(data.pre) + 1])


def test_class_kinf_spot_check():
    assert is_class_kinf(lambda s: s * s)
    assert not is_class_kinf(lambda s: 1.0 + s)
    assert not is_class_kinf(lambda s: min(s, 1.0))


def test_example1_sandwich():
    pair = example1_lyapunov()
    states = np.linspace(-3, 3, 61).reshape(-1, 1)
    assert check_sandwich(pair, states) <= 1e-12


def test_example1_decay_input_satisfies_flow_and_jump():
    p = Example1Params()
    pair = example1_lyapunov(p)
    traj = simulate(example1_system(p), EXAMPLE1_PHI, ExpDecayInput(5.0, 1.0), gen_periodic(0.0, 2.1, 4), 10.0, 0.005)
    assert check_flow_condition(pair, traj, p.mu).ok
    assert check_jump_condition(pair, traj, p.rho1, p.rho2).ok


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 0.5))
def test_jump_excess_is_antitone_in_rho(r1, r2, extra):
    traj = simulate(halving_system(), 1.0, ZeroInput(1), gen_periodic(0.0, 1.0, 3), 3.5, 0.1)
    pair = quadratic_pair()
    low = check_jump_condition(pair, traj, r1, r2)
    high = check_jump_condition(pair, traj, r1 + extra, r2 + extra)
    assert all(b <= a + 1e-15 for a, b in zip(low.excess, high.excess))
    assert high.violations <= low.violations


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 1.0))
def test_flow_violations_grow_with_mu(mu, extra):
    traj = simulate(decay_system(), 1.0, ZeroInput(1), ImpulseSchedule(()), 1.0, 0.05)
    a = check_flow_condition(quadratic_pair(), traj, mu)
    b = check_flow_condition(quadratic_pair(), traj, mu + extra)
    assert b.max_excess >= a.max_excess
    assert b.violations >= a.violations
