"""Method-of-steps RK4 integration of impulsive delay systems."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass

import numpy as np

from .history import History, time_eps
from .model import (
    DelayedView,
    ImpulseSchedule,
    ImpulsiveSystem,
    InputSignal,
    ParameterError,
    validate_schedule,
)

__all__ = [
    "DivergenceError",
    "Event",
    "RefinementTable",
    "Trajectory",
    "refine_check",
    "simulate",
]

log = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e12


class DivergenceError(RuntimeError):
    def __init__(self, t: float, norm: float):
        super().__init__(f"state diverged at t={t:.6g} (norm {norm:.3g})")
        self.t = t
        self.norm = norm


@dataclass(frozen=True)
class Event:
    k: int
    t: float
    pre: np.ndarray
    post: np.ndarray
    dx: np.ndarray


@dataclass
class Trajectory:
    system: ImpulsiveSystem
    history: History
    events: list[Event]
    input: InputSignal
    schedule: ImpulseSchedule
    t0: float
    t_end: float
    step: float
    flow_evals: int = 0
    first_piece: int = 1

    def grid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Solution nodes on ``[t0, t_end]`` as ``(times, states, piece)``.

        Jump times appear twice: pre-jump row first, then post-jump row.
        """
        times, states, piece = self.history.nodes()
        keep = piece >= self.first_piece
        return times[keep], states[keep], piece[keep]

    def pre_jump_mask(self) -> np.ndarray:
        """True on grid rows that hold a pre-jump (left-limit) value."""
        times, _, piece = self.grid()
        mask = np.zeros(len(times), dtype=bool)
        mask[:-1] = piece[:-1] != piece[1:]
        return mask

    def norms(self, states: np.ndarray | None = None) -> np.ndarray:
        if states is None:
            states = self.grid()[1]
        return np.linalg.norm(self.system.project(states), axis=-1)

    def eval(self, t: float) -> np.ndarray:
        return self.history.eval(t)

    def left_limit(self, t: float) -> np.ndarray:
        return self.history.left_limit(t)

    @property
    def final_state(self) -> np.ndarray:
        return self.history.eval(self.t_end)

    @property
    def initial_norm(self) -> float:
        """``||phi||_r`` of the monitored components, sampled on the initial nodes."""
        _, states, piece = self.history.nodes()
        values = states[piece < self.first_piece]
        return float(np.max(np.linalg.norm(self.system.project(values), axis=1)))


def _initial_history(initial, system: ImpulsiveSystem, t0: float, step: float) -> History:
    r = system.delay_bound
    if isinstance(initial, History):
        hist = copy.deepcopy(initial)
        if hist.dimension != system.dimension:
            raise ParameterError(f"initial history has dimension {hist.dimension}, system needs {system.dimension}")
        if hist.start > t0 - r + time_eps(t0) or abs(hist.t_now - t0) > time_eps(t0):
            raise ParameterError(
                f"initial history covers [{hist.start}, {hist.t_now}], need [{t0 - r}, {t0}]"
            )
        return hist
    if callable(initial):
        return History.from_function(initial, t0, r, step)
    value = np.broadcast_to(np.asarray(initial, dtype=float), (system.dimension,))
    return History.constant(value, t0, r)


def _check_step(system: ImpulsiveSystem, step: float) -> None:
    if not (step > 0 and math.isfinite(step)):
        raise ParameterError("step must be positive and finite")
    lag = system.min_flow_lag
    if lag is not None and step > lag + time_eps(lag):
        raise ParameterError(f"step {step} exceeds the smallest flow delay {lag}; delayed lookups would enter the current step")
    for lag in system.flow_lags + system.jump_lags:
        if lag > 0 and abs(lag / step - round(lag / step)) > 1e-9:
            log.warning("delay %g is not a multiple of step %g; expect reduced order", lag, step)


def simulate(
    system: ImpulsiveSystem,
    initial,
    w: InputSignal,
    schedule: ImpulseSchedule,
    t_end: float,
    step: float,
    t0: float = 0.0,
    divergence_bound: float = DIVERGENCE_BOUND,
) -> Trajectory:
    """Integrate ``system`` from the initial function on ``[t0 - r, t0]`` to ``t_end``.

    ``initial`` may be a :class:`History`, a callable ``phi(t)`` or a constant
    vector.  Classical RK4 runs on each inter-impulse interval with the step
    shrunk to ``(b - a) / ceil((b - a) / step)`` so impulse times are grid
    nodes.  At ``t_k`` the jump map sees the left-limit view and ``w(t_k^-)``.
    """
    _check_step(system, step)
    if t_end <= t0:
        raise ParameterError("t_end must exceed t0")
    validate_schedule(schedule, t0)
    if w.dimension != system.input_dimension:
        raise ParameterError(f"input has dimension {w.dimension}, system expects {system.input_dimension}")

    r = system.delay_bound
    hist = _initial_history(initial, system, t0, step)
    flow = system.flow
    evals = 0

    def f(t, state, from_left=False):
        nonlocal evals
        evals += 1
        view = DelayedView(hist, t, r, state=state, delayed_left=from_left)
        return np.asarray(flow(t, view, w.left_limit(t) if from_left else w(t)), dtype=float)

    def guard(t, state):
        norm = float(np.linalg.norm(state))
        if not math.isfinite(norm) or norm > divergence_bound:
            raise DivergenceError(t, norm)

    x = hist.eval(t0).copy()
    dx = f(t0, x)
    first_piece = len(hist.pieces)
    hist.split(dx)

    impulses = [(k, t) for k, t in enumerate(schedule.times, start=1) if t0 < t <= t_end + time_eps(t_end)]
    bounds = [t for _, t in impulses]
    if not bounds or bounds[-1] < t_end - time_eps(t_end):
        bounds.append(t_end)
    events: list[Event] = []
    a = t0
    it = iter(impulses)
    pending = next(it, None)
    for b in bounds:
        n = max(1, math.ceil((b - a) / step - 1e-9))
        h = (b - a) / n
        t = a
        for i in range(1, n + 1):
            t_next = b if i == n else a + i * h
            hh = t_next - t
            k1 = dx
            k2 = f(t + 0.5 * hh, x + 0.5 * hh * k1)
            k3 = f(t + 0.5 * hh, x + 0.5 * hh * k2)
            k4 = f(t_next, x + hh * k3, from_left=True)
            x = x + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            guard(t_next, x)
            dx = f(t_next, x)
            hist.append_node(t_next, x, dx)
            t = t_next
        if pending is not None and pending[1] == b:
            k, tk = pending
            view = DelayedView(hist, tk, r, left=True)
            jump = np.asarray(system.jump(k, tk, view, w.left_limit(tk)), dtype=float).reshape(system.dimension)
            pre = x.copy()
            x = pre + jump
            guard(tk, x)
            dx = f(tk, x)
            hist.apply_jump(tk, x, dx)
            events.append(Event(k, tk, pre, x.copy(), jump))
            pending = next(it, None)
        a = b
    return Trajectory(system, hist, events, w, schedule, t0, t_end, step, evals, first_piece)


@dataclass(frozen=True)
class RefinementTable:
    steps: tuple[float, float, float]
    endpoints: np.ndarray
    differences: tuple[float, float]
    order: float

    @property
    def monotone(self) -> bool:
        return self.differences[1] <= self.differences[0]


def refine_check(
    system: ImpulsiveSystem,
    initial,
    w: InputSignal,
    schedule: ImpulseSchedule,
    t_end: float,
    step: float,
    t0: float = 0.0,
) -> RefinementTable:
    """Endpoint states at ``h``, ``h/2``, ``h/4`` and the observed order.

    ``order`` is ``nan`` when the finer difference vanishes.
    """
    steps = (step, step / 2.0, step / 4.0)
    ends = np.vstack([
        system.project(simulate(system, initial, w, schedule, t_end, h, t0).final_state) for h in steps
    ])
    d1 = float(np.linalg.norm(ends[0] - ends[1]))
    d2 = float(np.linalg.norm(ends[1] - ends[2]))
    order = math.log2(d1 / d2) if d2 > 0 and d1 > 0 else float("nan")
    return RefinementTable(steps, ends, (d1, d2), order)
