"""Empirical input-to-state stability checks over simulated ensembles.

An ISS witness here is the exponential pair

    beta(s, t)  = M s exp(-lam t)      (class KL in (s, t))
    gamma(s)    = c s**q               (class K-infinity)

and a run passes when ``|x(t)| <= beta(|phi|_r, t - t0) + gamma(sup_{[t0,t]} |w|)``
on every grid row.  Uniformity over a schedule class is only ever sampled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .integrator import Trajectory, simulate
from .model import (
    ImpulseSchedule,
    ImpulsiveSystem,
    InputSignal,
    ParameterError,
    SplitMix64,
    ZeroInput,
    gen_random_dwell,
    validate_schedule,
)

__all__ = [
    "EnsembleSpec",
    "EnvelopeReport",
    "EnvelopeSpec",
    "FitError",
    "Member",
    "RunResult",
    "build_ensemble",
    "check_envelope",
    "fit_envelope",
    "input_sup_profile",
    "peak_envelope",
    "run_ensemble",
    "zero_input_convergence",
]

log = logging.getLogger(__name__)

ATOL = 1e-9
RTOL = 1e-6
# normalized envelope values below this are rounding-level and left out of the decay fit
FIT_FLOOR = 1e-12
# the input-gain exponent is fitted only across input sups spanning at least
# this log-ratio, and kept only when it lands in Q_RANGE
Q_SPREAD = math.log(1.5)
Q_RANGE = (0.25, 4.0)


class FitError(RuntimeError):
    """No exponential ISS witness could be fitted."""


@dataclass(frozen=True)
class EnvelopeSpec:
    M: float
    lam: float
    c: float = 0.0
    q: float = 1.0

    def __post_init__(self):
        vals = (self.M, self.lam, self.c, self.q)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError("envelope parameters must be finite")
        if self.M < 1 or self.lam <= 0 or self.c < 0 or self.q <= 0:
            raise ParameterError("need M >= 1, lam > 0, c >= 0, q > 0")

    def beta(self, s, t):
        return self.M * np.asarray(s, dtype=float) * np.exp(-self.lam * np.asarray(t, dtype=float))

    def gamma(self, s):
        return self.c * np.power(np.asarray(s, dtype=float), self.q)

    def bound(self, phi_norm: float, t, w_sup):
        return self.beta(phi_norm, t) + self.gamma(w_sup)

    def to_dict(self) -> dict:
        return {"M": self.M, "lambda": self.lam, "c": self.c, "q": self.q}


def input_sup_profile(w: InputSignal, times, t0: float = 0.0) -> np.ndarray:
    """Running ``sup |w|`` over ``[t0, t]`` sampled at ``times`` (sorted)."""
    times = np.asarray(times, dtype=float)
    norms = w.norms(times)
    norms = np.where(times >= t0, norms, 0.0)
    return np.maximum.accumulate(norms) if len(norms) else norms


def peak_envelope(norms) -> np.ndarray:
    """Backward running maximum: the smallest non-increasing curve above ``norms``."""
    norms = np.asarray(norms, dtype=float)
    return np.maximum.accumulate(norms[::-1])[::-1]


@dataclass
class EnvelopeReport:
    passed: bool
    max_violation: float  # worst (|x| - bound) / (atol + rtol * bound)
    time_of_max: float
    max_excess: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "max_violation": self.max_violation,
            "time_of_max": self.time_of_max,
            "max_excess": self.max_excess,
            "samples": self.samples,
        }


def check_envelope(
    traj: Trajectory,
    env: EnvelopeSpec,
    phi_norm: float | None = None,
    w_sup_profile=None,
    atol: float = ATOL,
    rtol: float = RTOL,
) -> EnvelopeReport:
    """Pointwise envelope check on the integration grid.

    ``phi_norm`` defaults to the trajectory's initial ``|phi|_r`` and
    ``w_sup_profile`` to :func:`input_sup_profile` on the grid.  A row fails
    when ``|x(t)|`` exceeds the bound by more than ``atol + rtol * bound``;
    ``max_violation`` is the excess in units of that allowance.
    """
    times, states, _ = traj.grid()
    norms = traj.norms(states)
    phi = traj.initial_norm if phi_norm is None else float(phi_norm)
    if w_sup_profile is None:
        sup = input_sup_profile(traj.input, times, traj.t0)
    elif callable(w_sup_profile):
        sup = np.asarray(w_sup_profile(times), dtype=float)
    else:
        sup = np.asarray(w_sup_profile, dtype=float)
    bound = env.bound(phi, times - traj.t0, sup)
    excess = norms - bound
    ratio = excess / (atol + rtol * bound)
    j = int(np.argmax(ratio))
    return EnvelopeReport(bool(ratio[j] <= 1.0), float(ratio[j]), float(times[j]), float(excess[j]), len(times))


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class Member:
    initial: object
    input: InputSignal
    schedule: ImpulseSchedule
    label: str = ""


@dataclass
class EnsembleSpec:
    members: list[Member]
    t_end: float
    step: float
    t0: float = 0.0

    def __post_init__(self):
        classes = {(m.schedule.kind, m.schedule.delta) for m in self.members}
        if len(classes) > 1:
            raise ParameterError(f"ensemble mixes schedule classes {sorted(classes, key=str)}")
        for m in self.members:
            report = validate_schedule(m.schedule, self.t0)
            if not report.ok:
                raise ParameterError(f"member {m.label or '?'}: {report.message}")


@dataclass
class RunResult:
    trajectory: Trajectory
    label: str = ""
    phi_norm: float = field(init=False)

    def __post_init__(self):
        self.phi_norm = self.trajectory.initial_norm

    @property
    def zero_input(self) -> bool:
        return isinstance(self.trajectory.input, ZeroInput)

    @property
    def final_norm(self) -> float:
        return float(np.linalg.norm(self.trajectory.system.project(self.trajectory.final_state)))


def run_ensemble(system: ImpulsiveSystem, spec: EnsembleSpec) -> list[RunResult]:
    """Simulate every member independently; results come back in member order."""
    out = []
    for m in spec.members:
        traj = simulate(system, m.initial, m.input, m.schedule, spec.t_end, spec.step, spec.t0)
        out.append(RunResult(traj, m.label))
    return out


def build_ensemble(
    initial,
    inputs: dict[str, InputSignal],
    kind: str,
    delta: float,
    size: int,
    t_end: float,
    step: float,
    seed: int = 0,
    t0: float = 0.0,
    scale_range: tuple[float, float] = (0.5, 1.5),
) -> EnsembleSpec:
    """``size`` random schedules crossed with every input.

    Schedules come from :func:`gen_random_dwell`: gaps in ``[delta/2, delta]``
    for the ``sup`` class and ``[delta, 2 delta]`` for ``inf``.  Each
    schedule gets its own history scale drawn from ``scale_range``.
    """
    if size < 1:
        raise ParameterError("ensemble size must be at least 1")
    if kind not in ("inf", "sup"):
        raise ParameterError("ensemble schedules must be of class 'inf' or 'sup'")
    rng = SplitMix64(seed)
    lo, hi = (0.5 * delta, delta) if kind == "sup" else (delta, 2.0 * delta)
    count = int(math.ceil((t_end - t0) / lo)) + 1
    base = initial if callable(initial) else np.asarray(initial, dtype=float)
    members = []
    for i in range(size):
        sched = gen_random_dwell(t0, lo, hi, count, rng.next_u64())
        sched = sched.with_class(kind, delta)
        scale = scale_range[0] + (scale_range[1] - scale_range[0]) * rng.uniform()
        phi = (lambda t, f=base, a=scale: a * np.asarray(f(t))) if callable(base) else scale * base
        for name, w in inputs.items():
            members.append(Member(phi, w, sched, f"{name}#{i}"))
    return EnsembleSpec(members, t_end, step, t0)


def zero_input_convergence(runs: list[RunResult]) -> dict:
    """Per-run ``|x(t_end)| / |phi|_r`` for zero-input runs."""
    if any(not r.zero_input for r in runs):
        raise ParameterError("zero_input_convergence needs zero-input runs only")
    ratios = [r.final_norm / r.phi_norm if r.phi_norm > 0 else 0.0 for r in runs]
    return {"ratios": ratios, "max_ratio": max(ratios) if ratios else math.nan}


def _decay_rate(runs: list[RunResult]) -> float:
    """Pooled log-linear slope of the normalized peak envelope."""
    ts, ys = [], []
    for r in runs:
        times, states, _ = r.trajectory.grid()
        env = peak_envelope(r.trajectory.norms(states)) / r.phi_norm
        keep = env > FIT_FLOOR
        ts.append(times[keep] - r.trajectory.t0)
        ys.append(np.log(env[keep]))
    t = np.concatenate(ts)
    y = np.concatenate(ys)
    if len(t) < 2 or np.ptp(t) == 0:
        raise FitError("no ISS witness found: too few samples for a decay fit")
    slope = np.polyfit(t, y, 1)[0]
    return -float(slope)


def fit_envelope(runs: list[RunResult]) -> EnvelopeSpec:
    """Fit an exponential witness that covers every run.

    ``lam`` comes from log-linear regression on the zero-input runs' peak
    envelopes and ``M`` is the largest ratio ``|x(t)| / (|phi| e^{-lam t})``
    over those runs.  The input gain ``c s**q`` is then sized so that every
    driven run sits under ``beta + gamma``; ``q`` is a log-log fit of
    ultimate bounds against input sups when those sups span at least a
    factor 1.5, else 1.  Without zero-input runs ``lam`` falls back to
    ``1 / (t_end - t0)`` of the longest run.
    """
    if not runs:
        raise FitError("no ISS witness found: empty ensemble")
    runs = [r for r in runs if r.phi_norm > 0 or not r.zero_input]
    zero = [r for r in runs if r.zero_input]
    driven = [r for r in runs if not r.zero_input]
    for r in zero:
        if r.final_norm > r.phi_norm:
            raise FitError(
                f"no ISS witness found: zero-input run {r.label or '?'} grew from {r.phi_norm:.6g} to {r.final_norm:.6g}"
            )
    if zero:
        lam = _decay_rate(zero)
        if not lam > 0:
            raise FitError(f"no ISS witness found: fitted decay rate {lam:.6g} is not positive")
    else:
        horizon = max(r.trajectory.t_end - r.trajectory.t0 for r in runs)
        lam = 1.0 / horizon
        log.warning("no zero-input runs; decay rate defaults to 1/horizon = %g", lam)

    M = 1.0
    rows = []
    for r in runs:
        times, states, _ = r.trajectory.grid()
        t = times - r.trajectory.t0
        norms = r.trajectory.norms(states)
        sup = input_sup_profile(r.trajectory.input, times, r.trajectory.t0)
        rows.append((r, t, norms, sup))
        decay = r.phi_norm * np.exp(-lam * t)
        # rows with no input yet seen must be covered by beta alone
        mask = (sup == 0) & (decay > 0)
        if r.zero_input or np.any(mask):
            sel = slice(None) if r.zero_input else mask
            if np.any(norms[sel] > 0):
                M = max(M, float(np.max(norms[sel] / decay[sel])))
    if not math.isfinite(M):
        raise FitError("no ISS witness found: envelope constant overflowed")

    q = 1.0
    if driven:
        ult = []
        for r, t, norms, sup in rows:
            if r.zero_input:
                continue
            tail = t >= 0.75 * t[-1]
            ult.append((float(sup[-1]), float(np.max(norms[tail]))))
        ult = np.array([u for u in ult if u[0] > 0 and u[1] > 0])
        # input levels must differ by a real factor; grid sampling alone
        # perturbs the observed sup by far less than this
        if len(ult) >= 2 and np.ptp(np.log(ult[:, 0])) > Q_SPREAD:
            slope = float(np.polyfit(np.log(ult[:, 0]), np.log(ult[:, 1]), 1)[0])
            if math.isfinite(slope) and Q_RANGE[0] <= slope <= Q_RANGE[1]:
                q = slope
    c = 0.0
    for r, t, norms, sup in rows:
        if r.zero_input:
            continue
        residual = norms - M * r.phi_norm * np.exp(-lam * t)
        pos = (residual > 0) & (sup > 0)
        if np.any(pos):
            c = max(c, float(np.max(residual[pos] / np.power(sup[pos], q))))
    if not math.isfinite(c):
        raise FitError("no ISS witness found: input gain overflowed")
    env = EnvelopeSpec(M, lam, c, q)
    for r, *_ in rows:
        if not check_envelope(r.trajectory, env, r.phi_norm).passed:
            raise FitError(f"no ISS witness found: fitted envelope misses run {r.label or '?'}")
    return env
