"""Impulsive time-delay systems, input signals and impulse schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .history import History, time_eps

__all__ = [
    "DelayBoundError",
    "DelayedView",
    "ExpDecayInput",
    "ImpulseSchedule",
    "ImpulsiveSystem",
    "InputSignal",
    "ParameterError",
    "PiecewiseConstantInput",
    "ScheduleError",
    "SinusoidInput",
    "SplitMix64",
    "ValidationReport",
    "ZeroInput",
    "check_zero_equilibrium",
    "gen_periodic",
    "gen_random_dwell",
    "validate_schedule",
]


class ParameterError(ValueError):
    pass


class ScheduleError(ValueError):
    """Impulse times are not strictly increasing after ``t0``."""


class DelayBoundError(ValueError):
    """A map queried the state outside its declared lookback window."""


# ---------------------------------------------------------------------------
# delayed-state view


class DelayedView:
    """Read-only window ``x_t`` (or ``x_{t^-}``) onto a history.

    Offsets ``s`` are in ``[-lookback, 0]``.  Offset 0 returns ``state`` when
    one is supplied (an RK stage value not yet in the record), otherwise the
    right value, or the left limit for ``left=True`` views.  Point lookups at
    ``s < 0`` return right values unless ``delayed_left`` is set; the
    integrator sets it for the stage at the end of a step, whose delayed
    arguments approach earlier jump times from the left.
    """

    __slots__ = ("history", "t", "lookback", "state", "left", "delayed_left")

    def __init__(
        self,
        history: History,
        t: float,
        lookback: float,
        state=None,
        left: bool = False,
        delayed_left: bool = False,
    ):
        self.history = history
        self.t = t
        self.lookback = lookback
        self.state = None if state is None else np.asarray(state, dtype=float)
        self.left = left
        self.delayed_left = delayed_left

    def _guard(self, s: float) -> None:
        eps = time_eps(self.t)
        if s < -self.lookback - eps or s > eps:
            raise DelayBoundError(
                f"offset {s!r} outside lookback window [-{self.lookback}, 0] at t={self.t}"
            )

    def current(self) -> np.ndarray:
        if self.state is not None:
            return self.state
        if self.left:
            return self.history.left_limit(self.t)
        return self.history.eval(self.t)

    def __call__(self, s: float = 0.0) -> np.ndarray:
        self._guard(s)
        if abs(s) <= time_eps(self.t):
            return self.current()
        when = self.t + s
        if when > self.history.t_now + time_eps(when):
            raise DelayBoundError(
                f"lookup at t={when} falls inside the step being computed "
                f"(record ends at {self.history.t_now}); reduce the step size"
            )
        if self.delayed_left and when > self.history.start + time_eps(when):
            return self.history.left_limit(when)
        return self.history.eval(when)

    def sup_norm(self, window: float | None = None) -> float:
        window = self.lookback if window is None else window
        self._guard(-window)
        h = self.history
        now = h.t_now
        if self.t <= now + time_eps(self.t):
            best = h.sup_norm_window(self.t, window, "left" if self.left else "right")
        elif self.t - window < now:
            # view ahead of the record: cover the stored part, then the stage value
            best = h.sup_norm_window(now, now - (self.t - window))
        else:
            best = 0.0
        if self.state is not None:
            best = max(best, float(np.linalg.norm(self.state)))
        return best

    def integrate(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], window: float | None = None):
        """Integrate ``fn(offsets, states)`` over offsets ``[-window, 0]``.

        When the view sits ahead of the record (an RK stage), the uncovered
        tail is closed with a trapezoid between the last node and ``state``.
        """
        window = self.lookback if window is None else window
        self._guard(-window)
        h = self.history
        a = self.t - window
        end = min(self.t, h.t_now)
        total = h.integrate(lambda s, x: fn(s - self.t, x), a, end) if end > a else 0.0
        gap = self.t - end
        if gap > time_eps(self.t):
            s = np.array([end, self.t]) - self.t
            xs = np.vstack([h.eval(end), self.current()])
            vals = np.asarray(fn(s, xs), dtype=float)
            total = total + 0.5 * gap * (vals[0] + vals[1])
        return total

    def integral(self, window: float | None = None) -> np.ndarray:
        return self.integrate(lambda s, x: x, window)


# ---------------------------------------------------------------------------
# systems


def _zero_map(*args):
    return 0.0


@dataclass(frozen=True)
class ImpulsiveSystem:
    """``x' = flow(t, x_t, w(t))`` between impulses, ``dx = jump(k, t, x_{t^-}, w(t^-))`` at them.

    ``flow_lags`` lists the discrete delays read by ``flow``; the integrator
    requires its step not to exceed the smallest positive one.  ``monitor``
    selects the state components whose norm is reported (all by default),
    which lets co-simulated reference states ride along without entering
    stability bookkeeping.
    """

    dimension: int
    input_dimension: int
    flow: Callable[[float, DelayedView, np.ndarray], np.ndarray]
    jump: Callable[[int, float, DelayedView, np.ndarray], np.ndarray]
    delay_bound: float = 0.0
    flow_lags: tuple[float, ...] = ()
    jump_lags: tuple[float, ...] = ()
    monitor: tuple[int, ...] | None = None
    name: str = "system"

    def __post_init__(self):
        if self.dimension < 1 or self.input_dimension < 0:
            raise ParameterError("dimensions must be positive")
        if self.delay_bound < 0:
            raise ParameterError("delay bound r must be nonnegative")
        for lag in self.flow_lags + self.jump_lags:
            if lag < 0 or lag > self.delay_bound + time_eps(self.delay_bound):
                raise ParameterError(f"lag {lag} outside [0, r={self.delay_bound}]")

    @property
    def monitored(self) -> np.ndarray:
        if self.monitor is None:
            return np.arange(self.dimension)
        return np.asarray(self.monitor)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., self.monitored]

    @property
    def min_flow_lag(self) -> float | None:
        positive = [lag for lag in self.flow_lags if lag > 0]
        return min(positive) if positive else None


def check_zero_equilibrium(system: ImpulsiveSystem, t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate flow and jump at the zero history with zero input."""
    # a positive horizon keeps the left limit at t defined when r = 0
    hist = History.constant(np.zeros(system.dimension), t, max(system.delay_bound, 1.0))
    w = np.zeros(system.input_dimension)
    view = DelayedView(hist, t, system.delay_bound)
    left = DelayedView(hist, t, system.delay_bound, left=True)
    return (
        np.asarray(system.flow(t, view, w), dtype=float),
        np.asarray(system.jump(1, t, left, w), dtype=float),
    )


# ---------------------------------------------------------------------------
# inputs


class InputSignal:
    """Piecewise right-continuous input ``w : [t0, inf) -> R^m``."""

    dimension: int

    def __call__(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def left_limit(self, t: float) -> np.ndarray:
        return self(t)

    def values(self, times) -> np.ndarray:
        return np.vstack([self(t) for t in np.atleast_1d(times)]) if len(np.atleast_1d(times)) else np.zeros((0, self.dimension))

    def norms(self, times) -> np.ndarray:
        return np.linalg.norm(self.values(times), axis=1)

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroInput(InputSignal):
    dimension: int = 1

    def __call__(self, t):
        return np.zeros(self.dimension)

    def values(self, times):
        return np.zeros((len(np.atleast_1d(times)), self.dimension))

    def to_config(self):
        return {"kind": "zero", "params": {"dimension": self.dimension}}


def _vec(a) -> np.ndarray:
    return np.atleast_1d(np.asarray(a, dtype=float))


@dataclass(frozen=True)
class ExpDecayInput(InputSignal):
    """``w(t) = amplitude * exp(-rate * t)``."""

    amplitude: tuple[float, ...]
    rate: float

    def __init__(self, amplitude, rate: float):
        object.__setattr__(self, "amplitude", tuple(_vec(amplitude)))
        object.__setattr__(self, "rate", float(rate))

    @property
    def dimension(self):
        return len(self.amplitude)

    def __call__(self, t):
        return np.asarray(self.amplitude) * math.exp(-self.rate * t)

    def values(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return np.exp(-self.rate * times)[:, None] * np.asarray(self.amplitude)[None, :]

    def to_config(self):
        return {"kind": "exp_decay", "params": {"amplitude": list(self.amplitude), "rate": self.rate}}


@dataclass(frozen=True)
class SinusoidInput(InputSignal):
    """``w(t) = amplitude * sin(omega * t + phase)``."""

    amplitude: tuple[float, ...]
    omega: float
    phase: float = 0.0

    def __init__(self, amplitude, omega: float, phase: float = 0.0):
        object.__setattr__(self, "amplitude", tuple(_vec(amplitude)))
        object.__setattr__(self, "omega", float(omega))
        object.__setattr__(self, "phase", float(phase))

    @property
    def dimension(self):
        return len(self.amplitude)

    def __call__(self, t):
        return np.asarray(self.amplitude) * math.sin(self.omega * t + self.phase)

    def values(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return np.sin(self.omega * times + self.phase)[:, None] * np.asarray(self.amplitude)[None, :]

    def to_config(self):
        return {
            "kind": "sinusoid",
            "params": {"amplitude": list(self.amplitude), "omega": self.omega, "phase": self.phase},
        }


@dataclass(frozen=True)
class PiecewiseConstantInput(InputSignal):
    """Right-continuous staircase: ``values[i]`` on ``[times[i], times[i+1])``.

    Before ``times[0]`` the first plateau applies.
    """

    times: tuple[float, ...]
    levels: tuple[tuple[float, ...], ...]

    def __init__(self, times: Sequence[float], levels):
        times = tuple(float(t) for t in times)
        levels = np.asarray(levels, dtype=float)
        if levels.ndim == 1:
            levels = levels[:, None]
        if len(times) == 0 or len(times) != len(levels):
            raise ParameterError("piecewise-constant input needs one level per breakpoint")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ParameterError("breakpoints must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "levels", tuple(tuple(row) for row in levels))

    @property
    def dimension(self):
        return len(self.levels[0])

    def _index(self, t, side):
        arr = np.asarray(self.times)
        i = np.searchsorted(arr, t, side=side) - 1
        return np.clip(i, 0, len(arr) - 1)

    def __call__(self, t):
        return np.asarray(self.levels[int(self._index(t, "right"))])

    def left_limit(self, t):
        return np.asarray(self.levels[int(self._index(t, "left"))])

    def values(self, times):
        idx = self._index(np.atleast_1d(np.asarray(times, dtype=float)), "right")
        return np.asarray(self.levels)[idx]

    def to_config(self):
        return {"kind": "piecewise_constant", "params": {"times": list(self.times), "values": [list(v) for v in self.levels]}}


# ---------------------------------------------------------------------------
# schedules

_CLASSES = ("inf", "sup", "all")


@dataclass(frozen=True)
class ImpulseSchedule:
    """Finite impulse time list with its declared dwell-time class.

    ``kind`` is ``"inf"`` (every gap at least ``delta``), ``"sup"`` (every
    gap, including ``t_1 - t0``, at most ``delta``) or ``"all"``.
    """

    times: tuple[float, ...]
    kind: str = "all"
    delta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if self.kind not in _CLASSES:
            raise ParameterError(f"unknown schedule class {self.kind!r}; expected one of {_CLASSES}")
        if self.kind != "all" and (self.delta is None or self.delta <= 0):
            raise ParameterError(f"class {self.kind!r} needs a positive delta")

    def __len__(self):
        return len(self.times)

    def within(self, t0: float, t_end: float) -> list[float]:
        return [t for t in self.times if t0 < t <= t_end + time_eps(t_end)]

    def with_class(self, kind: str, delta: float | None = None) -> "ImpulseSchedule":
        return ImpulseSchedule(self.times, kind, delta)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    index: int | None = None
    gap: float | None = None
    message: str = "ok"


def validate_schedule(schedule: ImpulseSchedule, t0: float = 0.0) -> ValidationReport:
    """Check the declared class over all consecutive gaps.

    Indices are 1-based (``index=k`` refers to the gap ``t_k - t_{k-1}``).
    Gaps are compared with a rounding allowance of :func:`time_eps`.
    Raises :class:`ScheduleError` for non-monotone times.
    """
    times = schedule.times
    prev = t0
    for k, t in enumerate(times, start=1):
        if not math.isfinite(t) or t <= prev:
            where = "t0" if k == 1 else f"t_{k - 1}={prev}"
            raise ScheduleError(f"impulse time t_{k}={t} does not exceed {where}")
        prev = t
    delta = schedule.delta
    gaps = np.diff(np.concatenate([[t0], times]))
    for k, gap in enumerate(gaps, start=1):
        slack = time_eps(times[k - 1])
        if schedule.kind == "inf" and k > 1 and gap < delta - slack:
            return ValidationReport(False, k, float(gap), f"gap t_{k}-t_{k-1}={gap:.6g} < delta={delta}")
        if schedule.kind == "sup" and gap > delta + slack:
            return ValidationReport(False, k, float(gap), f"gap t_{k}-t_{k-1}={gap:.6g} > delta={delta}")
    return ValidationReport(True)


def gen_periodic(t0: float, delta: float, count: int) -> ImpulseSchedule:
    """Impulses at ``t0 + k*delta`` for ``k = 1..count``."""
    if delta <= 0:
        raise ParameterError("delta must be positive")
    if count < 0:
        raise ParameterError("count must be nonnegative")
    return ImpulseSchedule(tuple(t0 + k * delta for k in range(1, count + 1)), "inf", delta)


class SplitMix64:
    """SplitMix64 counter-based generator.

    ``state += 0x9E3779B97F4A7C15``; output
    ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``,
    ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``, ``z ^ (z >> 31)``, all mod
    2**64.  Uniform doubles take the top 53 bits.  ``split`` seeds a child
    stream from the next output.
    """

    GAMMA = 0x9E3779B97F4A7C15
    MIX1 = 0xBF58476D1CE4E5B9
    MIX2 = 0x94D049BB133111EB
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * self.MIX1) & self.MASK
        z = ((z ^ (z >> 27)) * self.MIX2) & self.MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def split(self) -> "SplitMix64":
        return SplitMix64(self.next_u64())


def gen_random_dwell(
    t0: float, delta_min: float, delta_max: float, count: int, seed: int
) -> ImpulseSchedule:
    """Gaps drawn uniformly from ``[delta_min, delta_max]`` (first gap included).

    The result is declared ``sup(delta_max)``; it also validates as
    ``inf(delta_min)``.
    """
    if delta_min <= 0:
        raise ParameterError("delta_min must be positive")
    if delta_max < delta_min:
        raise ParameterError("delta_max must be >= delta_min")
    if count < 0:
        raise ParameterError("count must be nonnegative")
    rng = SplitMix64(seed)
    width = delta_max - delta_min
    times = []
    t = t0
    for _ in range(count):
        t = t + (delta_min + width * rng.uniform())
        times.append(t)
    return ImpulseSchedule(tuple(times), "sup", delta_max)
