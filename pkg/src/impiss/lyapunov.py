"""Lyapunov function/functional pairs evaluated along simulated trajectories.

The checks here are numerical diagnostics of sufficient conditions: the
Dini derivative is a forward difference on the integration grid and window
sups are taken over grid nodes plus one-sided values at jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .history import time_eps
from .integrator import Trajectory
from .model import DelayedView

__all__ = [
    "ConfigurationError",
    "ContractError",
    "FlowReport",
    "FunctionalReport",
    "JumpReport",
    "LyapunovPair",
    "check_flow_condition",
    "check_functional_bound",
    "check_jump_condition",
    "check_sandwich",
    "dini_estimate",
    "eval_V",
    "is_class_kinf",
    "series",
]

Scalar = Callable[[float], float]


class ConfigurationError(ValueError):
    pass


class ContractError(ValueError):
    """The Dini estimate was requested across an impulse."""


def _zero(s):
    return 0.0 * s


@dataclass(frozen=True)
class LyapunovPair:
    """``V(t, x_t) = V1(t, x(t)) + V2(t, x_t)``.

    ``V1(t, x)`` takes the full state vector; ``V2(t, view)`` reads a
    :class:`DelayedView` with lookback ``window``.  ``alpha*`` and ``chi_*``
    are scalar maps on ``[0, inf)``.  ``meta`` carries constants that belong
    to the pair (``mu``, ``rho1``, ``rho2`` ...).
    """

    V1: Callable[[float, np.ndarray], float]
    V2: Callable[[float, DelayedView], float] | None = None
    window: float = 0.0
    alpha1: Scalar | None = None
    alpha2: Scalar | None = None
    alpha3: Scalar | None = None
    kappa: float | None = None
    chi_flow: Scalar = _zero
    chi_jump: Scalar = _zero
    meta: dict = field(default_factory=dict)

    def v2(self, t: float, view: DelayedView) -> float:
        return 0.0 if self.V2 is None else float(self.V2(t, view))


def is_class_kinf(fn: Scalar, grid: np.ndarray | None = None) -> bool:
    """Spot check: zero at zero and strictly increasing on a log-spaced grid."""
    grid = np.logspace(-6, 6, 241) if grid is None else np.asarray(grid)
    if fn(0.0) != 0:
        return False
    vals = np.array([fn(s) for s in grid], dtype=float)
    return bool(np.all(np.isfinite(vals)) and np.all(np.diff(vals) > 0) and vals[0] > 0)


def check_sandwich(pair: LyapunovPair, states, t: float = 0.0, norm_of=np.linalg.norm) -> float:
    """Largest violation of ``alpha1(|x|) <= V1(t, x) <= alpha2(|x|)`` over samples."""
    worst = -math.inf
    for x in np.atleast_2d(states):
        s = float(norm_of(x))
        v = float(pair.V1(t, x))
        worst = max(worst, pair.alpha1(s) - v, v - pair.alpha2(s))
    return worst


# ---------------------------------------------------------------------------
# evaluation


def _view(traj: Trajectory, pair: LyapunovPair, t: float) -> DelayedView:
    return DelayedView(traj.history, t, pair.window)


def eval_V(pair: LyapunovPair, traj: Trajectory, t: float) -> tuple[float, float, float]:
    """``(V, V1, V2)`` at the right-continuous state at ``t``."""
    x = traj.history.eval(t)
    v1 = float(pair.V1(t, x))
    v2 = pair.v2(t, _view(traj, pair, t))
    return v1 + v2, v1, v2


@dataclass
class Series:
    times: np.ndarray
    states: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    pre: np.ndarray  # rows holding a pre-jump value
    piece: np.ndarray

    @property
    def V(self) -> np.ndarray:
        return self.V1 + self.V2


def series(pair: LyapunovPair, traj: Trajectory) -> Series:
    """``V1``, ``V2`` on every grid row of ``traj`` (jump times twice)."""
    times, states, piece = traj.grid()
    v1 = np.array([pair.V1(t, x) for t, x in zip(times, states)], dtype=float)
    v2 = np.zeros(len(times))
    if pair.V2 is not None:
        cache: dict[float, float] = {}
        for i, t in enumerate(times):
            if t not in cache:
                cache[t] = pair.v2(t, _view(traj, pair, t))
            v2[i] = cache[t]
    return Series(times, states, v1, v2, traj.pre_jump_mask(), piece)


def dini_estimate(pair: LyapunovPair, traj: Trajectory, t: float, h: float | None = None) -> float:
    """Forward difference ``[V(t+h) - V(t)] / h`` along continuous evolution.

    ``t + h`` may coincide with an impulse time, in which case the
    left-limit state is used there.  An impulse strictly inside
    ``(t, t + h)`` raises :class:`ContractError`.
    """
    h = traj.step if h is None else h
    eps = time_eps(t + h)
    for ev in traj.events:
        if t + eps < ev.t < t + h - eps:
            raise ContractError(f"impulse at t={ev.t} lies inside ({t}, {t + h})")
    v_now = eval_V(pair, traj, t)[0]
    t1 = t + h
    at_jump = any(abs(ev.t - t1) <= eps for ev in traj.events)
    x1 = traj.history.left_limit(t1) if at_jump else traj.history.eval(t1)
    v_next = float(pair.V1(t1, x1)) + pair.v2(t1, _view(traj, pair, t1))
    return (v_next - v_now) / h


# ---------------------------------------------------------------------------
# condition scans


def _tol(rel: float, v) -> np.ndarray:
    return rel * (1.0 + np.abs(v))


@dataclass
class FlowReport:
    max_excess: float
    time_of_max: float
    violations: int
    samples: int
    tol: float
    mode: str

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "max_excess": self.max_excess,
            "time_of_max": self.time_of_max,
            "violations": self.violations,
            "samples": self.samples,
            "tol": self.tol,
            "mode": self.mode,
        }


def check_flow_condition(
    pair: LyapunovPair,
    traj: Trajectory,
    mu: float,
    mode: str = "decay",
    tol: float = 1e-6,
    data: Series | None = None,
) -> FlowReport:
    """Scan ``D+V <= -mu V + chi(|w|)`` (``mode="decay"``) on all inter-impulse steps.

    ``mode="growth"`` checks ``D+V <= mu V + chi(|w|)`` instead.  A sample
    counts as a violation when its excess exceeds ``tol * (1 + |V|)``.
    """
    if mode not in ("decay", "growth"):
        raise ValueError("mode must be 'decay' or 'growth'")
    data = series(pair, traj) if data is None else data
    V = data.V
    same = data.piece[:-1] == data.piece[1:]
    idx = np.nonzero(same)[0]
    t = data.times
    dt = t[idx + 1] - t[idx]
    d_plus = (V[idx + 1] - V[idx]) / dt
    w_norm = traj.input.norms(t[idx])
    chi = np.array([pair.chi_flow(s) for s in w_norm], dtype=float)
    sign = 1.0 if mode == "decay" else -1.0
    excess = d_plus + sign * mu * V[idx] - chi
    bad = excess > _tol(tol, V[idx])
    j = int(np.argmax(excess)) if len(excess) else 0
    return FlowReport(
        float(excess[j]) if len(excess) else -math.inf,
        float(t[idx][j]) if len(excess) else math.nan,
        int(bad.sum()),
        len(excess),
        tol,
        mode,
    )


@dataclass
class JumpReport:
    excess: list[float]
    times: list[float]
    violations: int
    tol: float
    mode: str

    @property
    def max_excess(self) -> float:
        return max(self.excess) if self.excess else -math.inf

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "max_excess": self.max_excess,
            "per_event": [{"t": t, "excess": e} for t, e in zip(self.times, self.excess)],
            "violations": self.violations,
            "tol": self.tol,
            "mode": self.mode,
        }


def _window_input_sup(traj: Trajectory, t: float, r: float, times: np.ndarray) -> float:
    w = traj.input
    best = float(np.linalg.norm(w.left_limit(t)))
    inside = times[(times >= traj.t0) & (times < t - time_eps(t))]
    if len(inside):
        best = max(best, float(np.max(w.norms(inside))))
    if t - r >= traj.t0:
        best = max(best, float(np.linalg.norm(w(t - r))))
    return best


def check_jump_condition(
    pair: LyapunovPair,
    traj: Trajectory,
    rho1: float,
    rho2: float,
    mode: str = "instant",
    tol: float = 1e-6,
    window: float | None = None,
) -> JumpReport:
    """Per-event excess of ``V1(post) - rho1 V1(pre) - rho2 sup V1 - chi``.

    The sup runs over the left-limit window ``[t_k - r, t_k)`` with ``r`` the
    system delay bound unless ``window`` is given.  ``mode="instant"`` feeds
    ``|w(t_k^-)|`` to ``chi_jump``; ``mode="window"`` feeds the sup of
    ``|w|`` over the same window.
    """
    if mode not in ("instant", "window"):
        raise ValueError("mode must be 'instant' or 'window'")
    r = traj.system.delay_bound if window is None else window
    hist = traj.history
    excess, times = [], []
    bad = 0
    for ev in traj.events:
        v_post = float(pair.V1(ev.t, ev.post))
        v_pre = float(pair.V1(ev.t, ev.pre))
        ts, xs = hist.window_samples(ev.t, r, side="left")
        v_sup = max(float(pair.V1(s, x)) for s, x in zip(ts, xs))
        if mode == "instant":
            arg = float(np.linalg.norm(traj.input.left_limit(ev.t)))
        else:
            arg = _window_input_sup(traj, ev.t, r, ts)
        e = v_post - rho1 * v_pre - rho2 * v_sup - float(pair.chi_jump(arg))
        excess.append(e)
        times.append(ev.t)
        if e > tol * (1.0 + abs(v_post)):
            bad += 1
    return JumpReport(excess, times, bad, tol, mode)


@dataclass
class FunctionalReport:
    max_excess: float
    time_of_max: float
    violations: int
    samples: int
    tol: float

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "max_excess": self.max_excess,
            "time_of_max": self.time_of_max,
            "violations": self.violations,
            "samples": self.samples,
            "tol": self.tol,
        }


def _sliding_sup(node_t, node_v, hist, V1, times, r):
    """Max of ``V1`` over ``[t - r, t]`` for each ``t``: nodes plus the right value at ``t - r``."""
    eps = 1e-12 * np.maximum(1.0, np.abs(times))
    lo = np.searchsorted(node_t, times - r + eps, side="right")
    hi = np.searchsorted(node_t, times + eps, side="right")
    left_edge = hist.sample(times - r)
    edge = np.array([V1(t - r, x) for t, x in zip(times, left_edge)], dtype=float)
    out = np.empty(len(times))
    for i in range(len(times)):
        seg = node_v[lo[i]:hi[i]]
        out[i] = max(edge[i], seg.max()) if len(seg) else edge[i]
    return out


def check_functional_bound(
    pair: LyapunovPair,
    traj: Trajectory,
    tol: float = 1e-6,
    data: Series | None = None,
) -> FunctionalReport:
    """Scan ``V2(t) <= kappa * sup_{[t-r, t]} V1`` over the grid."""
    if pair.kappa is None:
        raise ConfigurationError("functional bound needs a comparison gain kappa")
    data = series(pair, traj) if data is None else data
    r = traj.system.delay_bound
    node_t, node_x, _ = traj.history.nodes()
    node_v = np.array([pair.V1(t, x) for t, x in zip(node_t, node_x)], dtype=float)
    rows = ~data.pre
    times = data.times[rows]
    sup = _sliding_sup(node_t, node_v, traj.history, pair.V1, times, r)
    excess = data.V2[rows] - pair.kappa * sup
    bad = excess > _tol(tol, data.V2[rows])
    j = int(np.argmax(excess))
    return FunctionalReport(float(excess[j]), float(times[j]), int(bad.sum()), len(excess), tol)
