"""Piecewise-continuous state record with cubic Hermite dense output.

The record covers ``[t0 - r, t_now]`` and is stored as a list of continuous
*pieces*.  A jump at ``t_k`` closes the current piece at its pre-jump value
and opens a new one at the post-jump value, so both one-sided values remain
addressable.  Evaluation is right-continuous; :meth:`History.left_limit`
returns the pre-jump branch.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "History",
    "HistoryError",
    "Jump",
    "RangeError",
    "hermite",
    "time_eps",
]

# 3-point Gauss-Legendre rule on [-1, 1]; exact for the quintic products
# that arise from integrating cubic interpolants against linear weights.
_GL_X = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GL_W = np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])


class HistoryError(ValueError):
    """Structural misuse of a history record (non-contiguous append etc.)."""


class RangeError(ValueError):
    """Query outside the stored interval."""


def time_eps(t: float) -> float:
    """Snapping tolerance used when comparing query times to stored times."""
    return 1e-12 * max(1.0, abs(t))


def hermite(theta, dt, x0, x1, m0, m1):
    """Cubic Hermite interpolant on one interval, ``theta`` in [0, 1].

    Works elementwise; ``theta``/``dt`` may carry a trailing axis of length 1
    to broadcast against state rows.  Written as ``x0 + h01 (x1 - x0) + ...``
    (using ``h00 = 1 - h01``) so constant data is reproduced exactly.
    """
    t2 = theta * theta
    t3 = t2 * theta
    h10 = t3 - 2.0 * t2 + theta
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    return x0 + h01 * (x1 - x0) + h10 * dt * m0 + h11 * dt * m1


@dataclass(frozen=True)
class Jump:
    t: float
    pre: np.ndarray
    post: np.ndarray


class _Piece:
    """Continuous stretch of nodes ``(t_i, x_i, x'_i)``."""

    __slots__ = ("t", "x", "dx", "_cache")

    def __init__(self) -> None:
        self.t: list[float] = []
        self.x: list[np.ndarray] = []
        self.dx: list[np.ndarray] = []
        self._cache: tuple[int, np.ndarray, np.ndarray, np.ndarray] | None = None

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = len(self.t)
        if self._cache is None or self._cache[0] != n:
            self._cache = (n, np.asarray(self.t), np.vstack(self.x), np.vstack(self.dx))
        return self._cache[1], self._cache[2], self._cache[3]

    @property
    def start(self) -> float:
        return self.t[0]

    @property
    def end(self) -> float:
        return self.t[-1]

    def value(self, t: float) -> np.ndarray:
        ts = self.t
        if t <= ts[0]:
            return self.x[0]
        i = bisect_right(ts, t) - 1
        if i >= len(ts) - 1:
            return self.x[-1]
        t0, t1 = ts[i], ts[i + 1]
        dt = t1 - t0
        return hermite((t - t0) / dt, dt, self.x[i], self.x[i + 1], self.dx[i], self.dx[i + 1])

    def values(self, times: np.ndarray) -> np.ndarray:
        T, X, DX = self.arrays()
        if len(T) == 1:
            return np.repeat(X[:1], len(times), axis=0)
        times = np.clip(times, T[0], T[-1])
        idx = np.clip(np.searchsorted(T, times, side="right") - 1, 0, len(T) - 2)
        dt = (T[idx + 1] - T[idx])[:, None]
        theta = (times[:, None] - T[idx][:, None]) / dt
        return hermite(theta, dt, X[idx], X[idx + 1], DX[idx], DX[idx + 1])

    def quad(self, fn, a: float, b: float) -> np.ndarray | None:
        """Gauss-Legendre quadrature of ``fn(s, x(s))`` over ``[a, b]`` within this piece."""
        T, X, DX = self.arrays()
        a = max(a, T[0])
        b = min(b, T[-1])
        if len(T) < 2 or b <= a:
            return None
        i0 = max(np.searchsorted(T, a, side="right") - 1, 0)
        i1 = min(np.searchsorted(T, b, side="left"), len(T) - 1)
        idx = np.arange(i0, i1)
        lo = np.maximum(T[idx], a)
        hi = np.minimum(T[idx + 1], b)
        keep = hi > lo
        idx, lo, hi = idx[keep], lo[keep], hi[keep]
        if idx.size == 0:
            return None
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        s = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        rows = np.repeat(idx, 3)
        dt = (T[rows + 1] - T[rows])[:, None]
        theta = (s[:, None] - T[rows][:, None]) / dt
        xs = hermite(theta, dt, X[rows], X[rows + 1], DX[rows], DX[rows + 1])
        vals = np.asarray(fn(s, xs), dtype=float)
        w = (half[:, None] * _GL_W[None, :]).ravel()
        if vals.ndim == 1:
            return np.dot(w, vals)
        return w @ vals


class History:
    """Trajectory record ``x : [t0 - r, t_now] -> R^n``.

    ``eval`` is right-continuous, ``left_limit`` returns pre-jump values at
    jump times.  Queries within :func:`time_eps` of a stored jump time are
    snapped onto it, so lookups such as ``x(t_k - d)`` that land on an
    earlier impulse time pick the post-jump branch regardless of rounding.
    """

    def __init__(self, dimension: int, origin: float, horizon: float) -> None:
        if dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if horizon < 0:
            raise ValueError("horizon r must be nonnegative")
        self.dimension = int(dimension)
        self.origin = float(origin)
        self.horizon = float(horizon)
        self._pieces: list[_Piece] = []
        self._starts: list[float] = []
        self.jumps: list[Jump] = []

    # -- construction ---------------------------------------------------

    @classmethod
    def from_function(
        cls,
        fn: Callable[[float], np.ndarray],
        origin: float,
        horizon: float,
        step: float,
        derivative: Callable[[float], np.ndarray] | None = None,
    ) -> "History":
        """Sample an initial function on ``[origin - horizon, origin]``.

        Nodes are spaced at most ``step`` apart.  Without ``derivative`` the
        node slopes come from second-order finite differences, which is exact
        for linear data.
        """
        x0 = np.atleast_1d(np.asarray(fn(origin), dtype=float))
        hist = cls(x0.size, origin, horizon)
        if horizon == 0:
            dx0 = np.zeros_like(x0) if derivative is None else np.atleast_1d(derivative(origin))
            hist.append_node(origin, x0, dx0)
            return hist
        count = max(1, int(np.ceil(horizon / step - 1e-9)))
        times = origin - horizon + horizon * np.arange(count + 1) / count
        times[-1] = origin
        values = np.vstack([np.atleast_1d(np.asarray(fn(s), dtype=float)) for s in times])
        if derivative is not None:
            slopes = np.vstack([np.atleast_1d(np.asarray(derivative(s), dtype=float)) for s in times])
        elif count == 1:
            slopes = np.repeat((values[1:] - values[:1]) / horizon, 2, axis=0)
        else:
            slopes = np.gradient(values, times, axis=0, edge_order=2)
        hist.append_segment(times, values, slopes)
        return hist

    @classmethod
    def constant(cls, value, origin: float, horizon: float) -> "History":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        hist = cls(value.size, origin, horizon)
        zero = np.zeros_like(value)
        if horizon == 0:
            hist.append_node(origin, value, zero)
        else:
            hist.append_segment([origin - horizon, origin], [value, value], [zero, zero])
        return hist

    def append_node(self, t: float, x: np.ndarray, dx: np.ndarray) -> None:
        """Append one node to the current piece; ``t`` must exceed ``t_now``."""
        if not self._pieces:
            piece = _Piece()
            self._pieces.append(piece)
            self._starts.append(float(t))
        else:
            piece = self._pieces[-1]
            if t <= piece.t[-1]:
                raise HistoryError(f"node time {t} does not advance past t_now={piece.t[-1]}")
        piece.t.append(float(t))
        piece.x.append(np.asarray(x, dtype=float).reshape(self.dimension))
        piece.dx.append(np.asarray(dx, dtype=float).reshape(self.dimension))

    def append_segment(self, times, values, derivatives) -> None:
        """Append a dense-output record starting at ``t_now``.

        The first node must coincide with the current right value; it is not
        duplicated.
        """
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float).reshape(len(times), self.dimension)
        derivatives = np.asarray(derivatives, dtype=float).reshape(len(times), self.dimension)
        if len(times) == 0:
            return
        if np.any(np.diff(times) <= 0):
            raise HistoryError("segment node times must be strictly increasing")
        first = 0
        if self._pieces:
            now = self.t_now
            if abs(times[0] - now) > time_eps(now):
                raise HistoryError(f"segment starts at {times[0]}, expected t_now={now}")
            current = self._pieces[-1].x[-1]
            if not np.allclose(values[0], current, rtol=1e-12, atol=1e-12):
                raise HistoryError(f"segment value at t={times[0]} does not match the stored state")
            first = 1
        for t, x, dx in zip(times[first:], values[first:], derivatives[first:]):
            self.append_node(t, x, dx)

    def apply_jump(self, t: float, value, derivative=None) -> Jump:
        """Record a jump at ``t = t_now`` and open a new piece at ``value``."""
        if not self._pieces:
            raise HistoryError("cannot jump on an empty record")
        now = self.t_now
        if abs(t - now) > time_eps(now):
            raise HistoryError(f"jump time {t} must equal t_now={now}")
        pre = self._pieces[-1].x[-1]
        post = np.asarray(value, dtype=float).reshape(self.dimension)
        self._open(post, derivative)
        jump = Jump(now, pre.copy(), post.copy())
        self.jumps.append(jump)
        return jump

    def split(self, derivative=None) -> None:
        """Open a new piece at ``t_now`` with the same value and no jump.

        Used where the solution is continuous but its slope is not (the
        junction between an initial function and the solution at ``t0``).
        """
        if not self._pieces:
            raise HistoryError("cannot split an empty record")
        self._open(self._pieces[-1].x[-1].copy(), derivative)

    def _open(self, value: np.ndarray, derivative) -> None:
        piece = _Piece()
        piece.t.append(self.t_now)
        piece.x.append(value.copy())
        dx = np.zeros(self.dimension) if derivative is None else derivative
        piece.dx.append(np.asarray(dx, dtype=float).reshape(self.dimension))
        self._pieces.append(piece)
        self._starts.append(piece.t[0])

    def set_last_derivative(self, dx) -> None:
        """Overwrite the slope stored at the newest node."""
        piece = self._pieces[-1]
        piece.dx[-1] = np.asarray(dx, dtype=float).reshape(self.dimension)
        piece._cache = None

    def prune(self, before: float) -> None:
        """Drop nodes strictly older than the interval containing ``before``."""
        while len(self._pieces) > 1 and self._pieces[1].start <= before:
            self._pieces.pop(0)
            self._starts.pop(0)
        piece = self._pieces[0]
        i = bisect_right(piece.t, before) - 1
        if i > 0:
            del piece.t[:i], piece.x[:i], piece.dx[:i]
            piece._cache = None
            self._starts[0] = piece.t[0]
        self.jumps = [j for j in self.jumps if j.t >= self._starts[0]]

    # -- queries ----------------------------------------------------------

    @property
    def start(self) -> float:
        return self._starts[0]

    @property
    def t_now(self) -> float:
        return self._pieces[-1].t[-1]

    @property
    def pieces(self) -> list[_Piece]:
        return self._pieces

    def _check(self, t: float, left: bool = False) -> float:
        if not self._pieces:
            raise RangeError("history is empty")
        lo, hi = self.start, self.t_now
        eps = time_eps(t)
        if t < lo - eps or t > hi + eps or (left and t <= lo + eps):
            bracket = "(" if left else "["
            raise RangeError(f"t={t!r} outside valid interval {bracket}{lo}, {hi}]")
        return min(max(t, lo), hi)

    def eval(self, t: float) -> np.ndarray:
        t = self._check(t)
        p = bisect_right(self._starts, t + time_eps(t)) - 1
        piece = self._pieces[p]
        if abs(t - piece.start) <= time_eps(t):
            return piece.x[0]
        return piece.value(t)

    def left_limit(self, t: float) -> np.ndarray:
        t = self._check(t, left=True)
        p = bisect_left(self._starts, t - time_eps(t)) - 1
        piece = self._pieces[max(p, 0)]
        if abs(t - piece.end) <= time_eps(t):
            return piece.x[-1]
        return piece.value(t)

    def sample(self, times, side: str = "right") -> np.ndarray:
        """Vectorised :meth:`eval` (``side="right"``) or :meth:`left_limit`."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((len(times), self.dimension))
        if len(times) == 0:
            return out
        for t in (times.min(), times.max()):
            self._check(t, left=(side == "left" and t == times.min()))
        eps = 1e-12 * np.maximum(1.0, np.abs(times))
        starts = np.asarray(self._starts)
        if side == "right":
            which = np.searchsorted(starts, times + eps, side="right") - 1
        else:
            which = np.maximum(np.searchsorted(starts, times - eps, side="left") - 1, 0)
        for p in np.unique(which):
            mask = which == p
            out[mask] = self._pieces[p].values(times[mask])
        return out

    def nodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All stored nodes as ``(times, values, piece_index)``.

        Jump times appear twice: the closing node of one piece (pre-jump)
        followed by the opening node of the next (post-jump).
        """
        ts, xs, ps = [], [], []
        for p, piece in enumerate(self._pieces):
            T, X, _ = piece.arrays()
            ts.append(T)
            xs.append(X)
            ps.append(np.full(len(T), p))
        return np.concatenate(ts), np.vstack(xs), np.concatenate(ps)

    def window_samples(self, t: float, r: float, side: str = "right") -> tuple[np.ndarray, np.ndarray]:
        """Sampling set for sups over the window ``[t - r, t]``.

        Contains the right value at ``t - r``, every stored node strictly
        inside the window (both branches at interior jumps), and the value at
        ``t`` itself: right value plus any pre-jump value for ``side="right"``,
        the left limit only for ``side="left"``.
        """
        if r < 0:
            raise ValueError("window length must be nonnegative")
        a = t - r
        self._check(a)
        self._check(t, left=(side == "left" and r > 0))
        eps = time_eps(t)
        times = [a]
        values = [self.eval(a)]
        p0 = max(bisect_right(self._starts, a) - 1, 0)
        p1 = bisect_right(self._starts, t + eps)
        for piece in self._pieces[p0:p1]:
            if piece.end <= a + eps:
                continue
            T, X, _ = piece.arrays()
            if side == "right":
                mask = (T > a + eps) & (T <= t + eps)
            else:
                mask = (T > a + eps) & (T < t - eps)
            times.extend(T[mask])
            values.extend(X[mask])
        if side == "right":
            times.append(t)
            values.append(self.eval(t))
        elif r > 0:
            times.append(t)
            values.append(self.left_limit(t))
        return np.asarray(times), np.vstack(values)

    def sup_norm_window(self, t: float, r: float, side: str = "right") -> float:
        _, values = self.window_samples(t, r, side)
        return float(np.max(np.linalg.norm(values, axis=1)))

    def integrate(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], a: float, b: float):
        """Integrate ``fn(s, x(s))`` over ``[a, b]``, splitting at jumps.

        ``fn`` receives a vector of times and a ``(k, n)`` array of states and
        returns ``(k,)`` or ``(k, m)`` values.  Each interpolation interval is
        integrated with 3-point Gauss-Legendre, which is exact for the stored
        cubic interpolant (so window integrals are additive to rounding).
        """
        if b < a:
            raise ValueError("integration bounds must satisfy a <= b")
        self._check(a)
        self._check(b)
        total = None
        p0 = max(bisect_right(self._starts, a) - 1, 0)
        p1 = bisect_left(self._starts, b)
        for piece in self._pieces[p0:p1]:
            if piece.end <= a:
                continue
            part = piece.quad(fn, a, b)
            if part is not None:
                total = part if total is None else total + part
        if total is None:
            probe = np.asarray(fn(np.array([a]), self.eval(a)[None, :]), dtype=float)
            return 0.0 if probe.ndim == 1 else np.zeros(probe.shape[1])
        return total

    def window_integral(self, t: float, tau: float) -> np.ndarray:
        """Componentwise integral of ``x`` over ``[t - tau, t]``."""
        if tau <= 0:
            raise ValueError("tau must be positive")
        return self.integrate(lambda s, x: x, t - tau, t)
