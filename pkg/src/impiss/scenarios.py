"""Built-in scenarios: the saturated scalar system and delayed Chua synchronization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .integrator import Trajectory, simulate
from .lyapunov import ConfigurationError, LyapunovPair
from .model import (
    ExpDecayInput,
    ImpulseSchedule,
    ImpulsiveSystem,
    SinusoidInput,
    ZeroInput,
)

__all__ = [
    "CHUA_A",
    "CHUA_B",
    "CHUA_D",
    "EXAMPLE1_PHI",
    "EXAMPLE2_PHI_E",
    "EXAMPLE2_PHI_X",
    "Example1Params",
    "Example2Params",
    "chua_g",
    "example1_inputs",
    "example1_lyapunov",
    "example1_system",
    "example2_direct",
    "example2_inputs",
    "example2_lyapunov",
    "example2_reference",
    "example2_system",
    "sat",
]


def sat(x):
    """Unit saturation ``(|x + 1| - |x - 1|) / 2``, componentwise."""
    # minimum/maximum rather than np.clip: same result, far less call overhead
    return np.minimum(np.maximum(x, -1.0), 1.0)


# ---------------------------------------------------------------------------
# scalar saturated system with a distributed-delay impulse


@dataclass(frozen=True)
class Example1Params:
    a: float = 0.2
    b: float = 0.1
    tau: float = 1.0
    eps: float = 5.0

    def __post_init__(self):
        if self.tau <= 0 or self.eps <= 0:
            raise ValueError("tau and eps must be positive")

    @property
    def mu(self) -> float:
        # exact rational arithmetic on the decimal constants, rounded once,
        # so 2 - 7(0.2) - 2(0.1) gives the double nearest 0.4
        a, b, tau, eps = (abs(Fraction(repr(v))) for v in (self.a, self.b, self.tau, self.eps))
        return float(min(2 - (eps + 2) * a - 2 * b, eps / ((eps + 1) * tau)))

    @property
    def rho1(self) -> float:
        return 2.0 * math.e

    @property
    def rho2(self) -> float:
        return 3.0 * self.tau / 16.0


def example1_system(p: Example1Params = Example1Params()) -> ImpulsiveSystem:
    a, b, tau = p.a, p.b, p.tau

    def flow(t, x, w):
        return -sat(x()) + a * sat(x(-tau)) + b * sat(w)

    def jump(k, t, x, w):
        return 0.25 * sat(x.integral(tau)) + 0.25 * sat(w)

    return ImpulsiveSystem(
        dimension=1,
        input_dimension=1,
        flow=flow,
        jump=jump,
        delay_bound=tau,
        flow_lags=(tau,),
        name="example1",
    )


def _v1_example1(t, x):
    s = abs(float(np.asarray(x).reshape(-1)[0]))
    return s * s if s <= 1.0 else math.exp(2.0 * (s - 1.0))


def example1_lyapunov(p: Example1Params = Example1Params(), flow_gain: float | None = None) -> LyapunovPair:
    """Piecewise V1 with the weighted saturated-integral functional.

    The jump gain is the quadratic majorant ``(3/16) s^2`` of ``(3/16) sat(s)^2``
    so that it is of class K-infinity.  The flow gain defaults to
    ``(|b|^2/2) s^2``.  The Young split ``2|b||x||w| <= 2|b|x^2 + (|b|/2) w^2``
    behind the ``-2|b|`` term of ``mu`` only supports ``(|b|/2) s^2``; pass
    ``flow_gain=abs(b)/2`` for that coefficient.
    """
    a, b, tau, eps = abs(p.a), abs(p.b), p.tau, p.eps
    gain = 0.5 * b * b if flow_gain is None else float(flow_gain)

    def V2(t, view):
        return a * view.integrate(lambda s, x: sat(x[:, 0]) ** 2 * (eps + 1.0 + eps * s / tau), tau)

    return LyapunovPair(
        V1=_v1_example1,
        V2=V2,
        window=tau,
        alpha1=lambda s: min(s * s, math.exp(2.0 * (s - 1.0))) if s > 0 else 0.0,
        alpha2=lambda s: max(s * s, math.exp(2.0 * (s - 1.0))) if s > 0 else 0.0,
        alpha3=lambda s: a * (eps + 1.0) * tau * s * s,
        kappa=None,
        chi_flow=lambda s: gain * s * s,
        chi_jump=lambda s: 3.0 / 16.0 * s * s,
        meta={"mu": p.mu, "rho1": p.rho1, "rho2": p.rho2, "r": tau},
    )


def example1_inputs() -> dict:
    return {
        "exp_decay": ExpDecayInput(5.0, 1.0),
        "sinusoid": SinusoidInput(2.0, 14.0 * math.pi),
    }


# ---------------------------------------------------------------------------
# delayed Chua circuit, impulsive synchronization

CHUA_A = np.array([[-18.0 / 7.0, 9.0, 0.0], [1.0, -1.0, 1.0], [0.0, -100.0 / 7.0, 0.0]])
CHUA_B = np.array([[0.0], [1.0 / 7.0], [1.0 / 7.0]])
CHUA_D = np.array([[2.0 / 7.0], [0.0], [0.0]])
_CHUA_G = np.array([27.0 / 7.0, 0.0, 0.0])


def chua_g(x):
    """``sat(x_1) * (27/7, 0, 0)``; accepts ``(3,)`` or ``(k, 3)``."""
    x = np.asarray(x, dtype=float)
    return sat(x[..., :1]) * _CHUA_G


@dataclass(frozen=True)
class Example2Params:
    A: np.ndarray = field(default_factory=lambda: CHUA_A.copy())
    B: np.ndarray = field(default_factory=lambda: CHUA_B.copy())
    C: np.ndarray = field(default_factory=lambda: -0.2 * np.eye(3))
    D: np.ndarray = field(default_factory=lambda: CHUA_D.copy())
    L: float = 27.0 / 7.0
    r: float = 0.02
    d: float = 0.01
    eps: float = 1.0
    g: Callable = chua_g
    g_linear: bool = False

    def __post_init__(self):
        for name in ("A", "B", "C", "D"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.C.shape != (n, n):
            raise ValueError("A and C must be square and of equal size")
        if self.B.shape[0] != n or self.D.shape[0] != n or self.B.shape[1] != self.D.shape[1]:
            raise ValueError("B and D must be n x m with a common m")
        if self.L < 0 or self.r < 0 or self.d < 0:
            raise ValueError("L, r and d must be nonnegative")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def kappa(self) -> float:
        return self.eps * self.r * self.L


def example2_system(p: Example2Params = Example2Params(), coupled: bool = True) -> ImpulsiveSystem:
    """Error dynamics of the impulsively synchronized pair.

    With ``coupled=True`` (default) the state is ``(x, e)``: the reference
    runs alongside so ``g(x(t-r) + e(t-r)) - g(x(t-r))`` is exact.  Only the
    error block is monitored.  ``coupled=False`` integrates ``e`` alone and is
    allowed only for linear ``g``.
    """
    A, B, C, D, r, d, g = p.A, p.B, p.C, p.D, p.r, p.d, p.g
    n = p.n
    delay = max(r, d)
    lags = (r,) if r > 0 else ()

    if not coupled:
        if not p.g_linear:
            raise ConfigurationError("nonlinear g needs the reference trajectory; use coupled=True")

        def flow_e(t, e, w):
            return A @ e() + g(e(-r)) + B @ w

        def jump_e(k, t, e, w):
            return C @ e(-d) + D @ w

        return ImpulsiveSystem(n, p.m, flow_e, jump_e, delay, lags, (d,), None, "example2-error")

    def flow(t, z, w):
        now = z()
        lag = z(-r)
        x, e = now[:n], now[n:]
        xr, er = lag[:n], lag[n:]
        gx = g(xr)
        return np.concatenate([A @ x + gx, A @ e + (g(xr + er) - gx) + B @ w])

    def jump(k, t, z, w):
        e_d = z(-d)[n:]
        return np.concatenate([np.zeros(n), C @ e_d + D @ w])

    return ImpulsiveSystem(
        dimension=2 * n,
        input_dimension=p.m,
        flow=flow,
        jump=jump,
        delay_bound=delay,
        flow_lags=lags,
        jump_lags=(d,),
        monitor=tuple(range(n, 2 * n)),
        name="example2",
    )


def example2_direct(p: Example2Params = Example2Params()) -> ImpulsiveSystem:
    """Drive and response ``(x, y)`` simulated directly, without the error change of variables."""
    A, B, C, D, r, d, g = p.A, p.B, p.C, p.D, p.r, p.d, p.g
    n = p.n

    def flow(t, z, w):
        now, lag = z(), z(-r)
        return np.concatenate([A @ now[:n] + g(lag[:n]), A @ now[n:] + g(lag[n:]) + B @ w])

    def jump(k, t, z, w):
        past = z(-d)
        return np.concatenate([np.zeros(n), C @ (past[n:] - past[:n]) + D @ w])

    return ImpulsiveSystem(2 * n, p.m, flow, jump, max(r, d), (r,) if r > 0 else (), (d,), None, "example2-direct")


def example2_reference(
    p: Example2Params, phi_x, t_end: float, step: float, t0: float = 0.0
) -> Trajectory:
    """Impulse-free delayed Chua trajectory (the synchronization target)."""
    A, g, r = p.A, p.g, p.r

    def flow(t, x, w):
        return A @ x() + g(x(-r))

    sys = ImpulsiveSystem(p.n, 1, flow, lambda k, t, x, w: np.zeros(p.n), r, (r,) if r > 0 else (), (), None, "chua")
    return simulate(sys, phi_x, ZeroInput(1), ImpulseSchedule(()), t_end, step, t0)


def example2_lyapunov(
    p: Example2Params = Example2Params(),
    eps1: float = 1e-3,
    eps2: float = 1.001,
    xi: float | None = None,
    zeta: int = 0,
) -> LyapunovPair:
    """``V1 = |e|^2`` and ``V2 = eps L int_{t-r}^t |e|^2``.

    Flow gain ``|B|^2/eps1 s^2`` and jump gain
    ``(1 + 1/xi) eps2^2/(eps2^2 - 1) (d|C||B| + |D|)^2 s^2`` come from Young
    splits of the input terms; ``xi`` defaults to the minimizer of the
    dwell-time combination.
    """
    from .certificates import example2_derive, spectral_norm

    n = p.n
    derived = example2_derive(p.A, p.C, p.L, p.r, p.d, p.eps, eps1, eps2, zeta)
    xi = derived.xi if xi is None else xi
    norm_b = spectral_norm(p.B)
    norm_c = spectral_norm(p.C)
    norm_d = spectral_norm(p.D)
    flow_gain = norm_b**2 / eps1
    split = (1.0 + 1.0 / xi) if xi else 1.0
    jump_gain = split * eps2**2 / (eps2**2 - 1.0) * (p.d * norm_c * norm_b + norm_d) ** 2
    scale = p.eps * p.L

    def V1(t, z):
        e = np.asarray(z)[n:] if len(z) == 2 * n else np.asarray(z)
        return float(e @ e)

    def V2(t, view):
        return scale * view.integrate(lambda s, z: np.sum(z[:, -n:] ** 2, axis=1), p.r)

    rho1 = (1.0 + xi) * derived.norm_I_plus_C**2 if xi else derived.norm_I_plus_C**2
    rho2 = (1.0 + 1.0 / xi) * derived.b**2 if xi else derived.b**2
    return LyapunovPair(
        V1=V1,
        V2=V2,
        window=p.r,
        alpha1=lambda s: s * s,
        alpha2=lambda s: s * s,
        alpha3=lambda s: p.kappa * s * s,
        kappa=p.kappa,
        chi_flow=lambda s: flow_gain * s * s,
        chi_jump=lambda s: jump_gain * s * s,
        meta={"mu": derived.mu, "rho1": rho1, "rho2": rho2, "xi": xi, "r": max(p.r, p.d)},
    )


def example2_inputs() -> dict:
    return {
        "zero": ZeroInput(1),
        "exp_decay": ExpDecayInput(1.0, 7.0),
        "cosine": SinusoidInput(1.0, 16.0 * math.pi, math.pi / 2.0),
    }


EXAMPLE1_PHI = 1.0
EXAMPLE2_PHI_X = (0.1, 0.1, 0.1)
EXAMPLE2_PHI_E = (0.5, -0.5, 0.5)
