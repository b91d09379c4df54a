"""Closed-form dwell-time certificates.

Four ISS certificates for impulsive systems with delay-dependent impulses:

* ``T1``: stable flow, destabilising impulses, ``ln rho < mu delta`` with
  ``rho = rho1 + rho2 e^{mu r}`` (minimum dwell time, ``rho1 >= 1``).
* ``T2``: as T1 for ``rho1 < 1`` with a functional comparison gain ``kappa``.
* ``T3``: unstable flow, stabilising impulses, maximum dwell time
  ``delta < -ln(rho1 + rho2 + (1 - rho1) kappa) / mu``.
* ``T4``: any impulse times when ``rho1 + rho2 + (1 - rho1) kappa < 1``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .linalg import NumericError, lambda_max, spectral_norm

__all__ = [
    "CertificateInputs",
    "CertificateReport",
    "Example2Derivation",
    "NumericError",
    "ParameterError",
    "PreconditionError",
    "Remark3Comparison",
    "certify",
    "combo",
    "example2_derive",
    "min_combo",
    "remark3_compare",
    "spectral_norm",
    "thm1_certificate",
    "thm2_certificate",
    "thm3_certificate",
    "thm4_check",
    "zeta_for_schedule",
]

EXAMPLE1_REPORTED_DELTA = 2.06


class ParameterError(ValueError):
    pass


class PreconditionError(ValueError):
    def __init__(self, theorem: str, violations: list[str]):
        super().__init__(f"{theorem} hypotheses violated: " + "; ".join(violations))
        self.theorem = theorem
        self.violations = violations


@dataclass(frozen=True)
class CertificateInputs:
    mu: float
    rho1: float
    rho2: float
    kappa: float | None = None
    r: float = 0.0

    def __post_init__(self):
        vals = [self.mu, self.rho1, self.rho2, self.r] + ([] if self.kappa is None else [self.kappa])
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError("certificate inputs must be finite")
        if self.rho1 < 0 or self.rho2 < 0 or self.r < 0:
            raise ParameterError("rho1, rho2 and r must be nonnegative")
        if self.kappa is not None and self.kappa < 0:
            raise ParameterError("kappa must be nonnegative")


@dataclass
class CertificateReport:
    theorem: str
    inputs: CertificateInputs
    rho: float
    delta_star: float | None
    admissible: str  # "gt": delta > delta_star, "lt": 0 < delta < delta_star, "all", "empty"
    delta_query: float | None = None
    margin_at_query: float | None = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def admissible_at_query(self) -> bool | None:
        if self.admissible in ("all", "empty"):
            return self.admissible == "all"
        if self.margin_at_query is None:
            return None
        return self.margin_at_query > 0

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "inputs": asdict(self.inputs),
            "rho": self.rho,
            "delta_star": self.delta_star,
            "admissible": self.admissible,
            "delta_query": self.delta_query,
            "margin_at_query": self.margin_at_query,
            "admissible_at_query": self.admissible_at_query,
            "diagnostics": list(self.diagnostics),
        }


def combo(rho1: float, rho2: float, kappa: float) -> float:
    """``rho1 + rho2 + (1 - rho1) kappa``."""
    return rho1 + rho2 + (1.0 - rho1) * kappa


def _require(theorem: str, checks: list[tuple[bool, str]]) -> None:
    bad = [msg for ok, msg in checks if not ok]
    if bad:
        raise PreconditionError(theorem, bad)


def _example1_note(inp: CertificateInputs) -> list[str]:
    close = lambda a, b: abs(a - b) <= 1e-5 * max(1.0, abs(b))  # noqa: E731
    if close(inp.rho1, 2 * math.e) and close(inp.rho2, 3 / 16) and close(inp.mu, 0.4) and close(inp.r, 1.0):
        value = math.log(inp.rho1 + inp.rho2 * math.exp(inp.mu * inp.r)) / inp.mu
        return [
            f"Example-1 constants: ln(rho1 + rho2 e^(mu r))/mu evaluates to {value:.4f}; "
            f"a threshold of {EXAMPLE1_REPORTED_DELTA} does not follow from this formula"
        ]
    return []


def thm1_certificate(inp: CertificateInputs, delta: float | None = None) -> CertificateReport:
    _require("T1", [
        (inp.mu > 0, f"mu={inp.mu} must be > 0"),
        (inp.rho1 >= 1, f"rho1={inp.rho1} must be >= 1"),
    ])
    rho = inp.rho1 + inp.rho2 * math.exp(inp.mu * inp.r)
    delta_star = math.log(rho) / inp.mu
    margin = None if delta is None else inp.mu * delta - math.log(rho)
    return CertificateReport("T1", inp, rho, delta_star, "gt", delta, margin, _example1_note(inp))


def thm2_certificate(inp: CertificateInputs, delta: float | None = None) -> CertificateReport:
    c = combo(inp.rho1, inp.rho2, inp.kappa) if inp.kappa is not None else math.nan
    _require("T2", [
        (inp.mu > 0, f"mu={inp.mu} must be > 0"),
        (inp.rho1 < 1, f"rho1={inp.rho1} must be < 1"),
        (inp.kappa is not None, "kappa is required"),
        (inp.kappa is None or c >= 1, f"rho1 + rho2 + (1 - rho1) kappa = {c:.6g} < 1 (T4 applies instead)"),
    ])
    rho = inp.rho1 + (inp.rho2 + (1.0 - inp.rho1) * inp.kappa) * math.exp(inp.mu * inp.r)
    delta_star = math.log(rho) / inp.mu
    margin = None if delta is None else inp.mu * delta - math.log(rho)
    return CertificateReport("T2", inp, rho, delta_star, "gt", delta, margin)


def thm3_certificate(inp: CertificateInputs, delta: float | None = None) -> CertificateReport:
    _require("T3", [
        (inp.mu > 0, f"mu={inp.mu} must be > 0"),
        (inp.rho1 < 1, f"rho1={inp.rho1} must be < 1"),
        (inp.kappa is not None, "kappa is required"),
    ])
    c = combo(inp.rho1, inp.rho2, inp.kappa)
    notes = []
    if c <= 0:
        delta_star = math.inf
    else:
        delta_star = -math.log(c) / inp.mu
    if c >= 1:
        notes.append(f"rho1 + rho2 + (1 - rho1) kappa = {c:.6g} >= 1: no dwell time is admissible")
        admissible = "empty"
    else:
        admissible = "lt"
    margin = None
    if delta is not None:
        margin = math.inf if c <= 0 else -inp.mu * delta - math.log(c)
    return CertificateReport("T3", inp, c, delta_star, admissible, delta, margin, notes)


def thm4_check(inp: CertificateInputs) -> CertificateReport:
    _require("T4", [
        (inp.mu >= 0, f"mu={inp.mu} must be >= 0"),
        (inp.rho1 < 1, f"rho1={inp.rho1} must be < 1"),
        (inp.kappa is not None, "kappa is required"),
    ])
    c = combo(inp.rho1, inp.rho2, inp.kappa)
    return CertificateReport("T4", inp, c, None, "all" if c < 1 else "empty", None, 1.0 - c)


_THEOREMS = {"1": thm1_certificate, "2": thm2_certificate, "3": thm3_certificate}


def certify(theorem: str | int, inp: CertificateInputs, delta: float | None = None) -> CertificateReport:
    key = str(theorem).upper().lstrip("T")
    if key == "4":
        return thm4_check(inp)
    if key not in _THEOREMS:
        raise ParameterError(f"unknown theorem {theorem!r}; expected 1-4")
    return _THEOREMS[key](inp, delta)


@dataclass(frozen=True)
class Remark3Comparison:
    ours: float
    theirs: float | None
    ratio: float | None
    note: str = ""

    @property
    def ours_at_least_theirs(self) -> bool | None:
        if self.theirs is None:
            return None
        return self.ours >= self.theirs * (1.0 - 1e-12)


def remark3_compare(inp: CertificateInputs) -> Remark3Comparison:
    """Upper dwell bound with and without the ``(1 - rho1)`` factor on ``kappa``.

    For delay-free impulses (``rho2 = 0``) our bound is
    ``-ln(rho1 + (1 - rho1) kappa)/mu``; the older one is
    ``ln(1/(rho1 + kappa))/mu`` and is undefined once ``rho1 + kappa >= 1``.
    """
    if inp.rho2 != 0:
        raise PreconditionError("delay-free comparison", [f"rho2={inp.rho2} must be 0"])
    _require("delay-free comparison", [
        (inp.mu > 0, f"mu={inp.mu} must be > 0"),
        (inp.rho1 < 1, f"rho1={inp.rho1} must be < 1"),
        (inp.kappa is not None, "kappa is required"),
    ])
    c = combo(inp.rho1, 0.0, inp.kappa)
    ours = math.inf if c <= 0 else -math.log(c) / inp.mu
    s = inp.rho1 + inp.kappa
    if s >= 1:
        return Remark3Comparison(ours, None, None, f"rho1 + kappa = {s:.6g} >= 1: comparison bound undefined")
    theirs = math.inf if s <= 0 else math.log(1.0 / s) / inp.mu
    ratio = ours / theirs if theirs not in (0.0, math.inf) else None
    return Remark3Comparison(ours, theirs, ratio)


def min_combo(a: float, b: float, kappa: float) -> tuple[float | None, float]:
    """Minimise ``(1 - kappa)(1 + xi) a^2 + (1 + 1/xi) b^2 + kappa`` over ``xi > 0``.

    Returns ``(xi_star, value)`` with value ``(sqrt(1 - kappa) a + b)^2 + kappa``.
    When ``a`` or ``b`` vanishes the infimum is only approached in a limit and
    ``xi_star`` is ``None``.
    """
    if a < 0 or b < 0:
        raise ParameterError("a and b must be nonnegative")
    if not 0 <= kappa < 1:
        raise ParameterError(f"kappa={kappa} must lie in [0, 1)")
    root = math.sqrt(1.0 - kappa)
    if a == 0 or b == 0:
        return None, (1.0 - kappa) * a * a + b * b + kappa
    return b / (a * root), (root * a + b) ** 2 + kappa


def zeta_for_schedule(times, d: float) -> int:
    """Largest number of impulses in ``(t_k - d, t_k)`` over the schedule."""
    times = np.asarray(times, dtype=float)
    best = 0
    for tk in times:
        eps = 1e-12 * max(1.0, abs(tk))
        inside = np.sum((times > tk - d + eps) & (times < tk - eps))
        best = max(best, int(inside))
    return best


@dataclass
class Example2Derivation:
    lambda_max: float
    norm_A: float
    norm_I_plus_C: float
    norm_C: float
    mu: float
    kappa: float
    a: float
    b: float
    xi: float | None
    rho1: float
    rho2: float
    combo_min: float
    report: CertificateReport
    feasibility_lhs: float
    feasibility_rhs: float | None
    delta: float | None

    @property
    def feasible(self) -> bool | None:
        if self.feasibility_rhs is None:
            return None
        return self.feasibility_lhs < self.feasibility_rhs

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "report"}
        out["feasible"] = self.feasible
        out["report"] = self.report.to_dict()
        return out


def example2_derive(
    A,
    C,
    L: float,
    r: float,
    d: float,
    eps: float = 1.0,
    eps1: float = 1e-3,
    eps2: float = 1.001,
    zeta: int = 0,
    delta: float | None = None,
) -> Example2Derivation:
    """Certificate constants for impulsive synchronization of delayed Lipschitz systems.

    ``mu = lambda_max(A + A^T) + L(eps + 1/eps) + eps1``, ``kappa = eps r L``,
    ``a = |I + C|``, ``b = eps2 d |C| (|A| + L) + zeta |C|^2``; ``rho1``,
    ``rho2`` are taken at the minimising split ``xi``.  The ``feasibility_*`` fields
    hold the feasibility test without the ``eps1``/``eps2`` slack:
    ``ln{[sqrt(1-kappa) a + d|C|(|A|+L) + zeta|C|^2]^2 + kappa} <
    -[lambda_max(A + A^T) + L(eps + 1/eps)] delta``.
    """
    if eps <= 0 or eps1 <= 0:
        raise ParameterError("eps and eps1 must be positive")
    if eps2 <= 1:
        raise ParameterError("eps2 must exceed 1")
    if int(zeta) != zeta or zeta < 0:
        raise ParameterError("zeta must be a nonnegative integer")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(C))):
        raise NumericError("A and C must be finite")
    n = A.shape[0]
    lam = lambda_max(A + A.T)
    norm_a = spectral_norm(A)
    norm_ipc = spectral_norm(np.eye(n) + C)
    norm_c = spectral_norm(C)
    kappa = eps * r * L
    base = lam + L * (eps + 1.0 / eps)
    mu = base + eps1
    tail = d * norm_c * (norm_a + L) + zeta * norm_c**2
    b = eps2 * d * norm_c * (norm_a + L) + zeta * norm_c**2
    xi, cmin = min_combo(norm_ipc, b, kappa)
    if xi is None:
        rho1, rho2 = norm_ipc**2, b * b
    else:
        rho1, rho2 = (1.0 + xi) * norm_ipc**2, (1.0 + 1.0 / xi) * b * b
    inputs = CertificateInputs(mu, rho1, rho2, kappa, max(r, d))
    try:
        report = thm3_certificate(inputs, delta)
    except PreconditionError as exc:
        report = CertificateReport("T3", inputs, cmin, None, "empty", delta, None, list(exc.violations))
    lhs = math.log((math.sqrt(1.0 - kappa) * norm_ipc + tail) ** 2 + kappa)
    rhs = None if delta is None else -base * delta
    return Example2Derivation(
        lam, norm_a, norm_ipc, norm_c, mu, kappa, norm_ipc, b, xi, rho1, rho2, cmin, report, lhs, rhs, delta
    )
