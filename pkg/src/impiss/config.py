"""JSON run configurations with strict key checking.

Schema (all top-level keys except ``system`` are optional)::

    {
      "system": "example1" | "example2" | {"kind": "linear", ...},
      "params": {...},                    # overrides for the built-in parameter set
      "input": {"kind": "zero" | "exp_decay" | "sinusoid" | "piecewise_constant",
                "params": {...}},
      "schedule": {"kind": "periodic" | "random" | "explicit" | "none",
                   "params": {...}},
      "initial_history": {"kind": "constant" | "linear" | "sampled", "values": ...},
      "integration": {"step": h, "t_end": T, "t0": 0.0},
      "lyapunov": true,
      "ensemble": {"size": 5, "kind": "sup", "delta": 0.01,
                   "inputs": [{"kind": ..., "params": ...}, ...]},
      "outputs": {"trajectory": path, "events": path, "figure": path},
      "seed": 0
    }

A ``linear`` system reads ``dx = A x + A_delay x(t - lag) + B w`` with
jumps ``J x(t^-) + J_delay x(t - jump_lag) + D w(t^-)``; every matrix except
``A`` is optional.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .history import History
from .lyapunov import LyapunovPair
from .model import (
    ExpDecayInput,
    ImpulseSchedule,
    ImpulsiveSystem,
    InputSignal,
    PiecewiseConstantInput,
    SinusoidInput,
    ZeroInput,
    gen_periodic,
    gen_random_dwell,
)
from .scenarios import (
    EXAMPLE1_PHI,
    EXAMPLE2_PHI_E,
    EXAMPLE2_PHI_X,
    Example1Params,
    Example2Params,
    example1_lyapunov,
    example1_system,
    example2_lyapunov,
    example2_system,
)

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "make_input", "make_schedule"]

BUILTINS = ("example1", "example2")

_TOP = {"system", "params", "input", "schedule", "initial_history", "integration", "lyapunov", "ensemble", "outputs", "seed"}
_LINEAR = {"kind", "A", "A_delay", "lag", "J", "J_delay", "jump_lag", "B", "D", "name"}
_PARAMS = {
    "example1": {"a", "b", "tau", "eps"},
    "example2": {"A", "B", "C", "D", "L", "r", "d", "eps"},
}
_INPUT_PARAMS = {
    "zero": {"dimension"},
    "exp_decay": {"amplitude", "rate"},
    "sinusoid": {"amplitude", "omega", "phase"},
    "piecewise_constant": {"times", "levels"},
}
_SCHEDULE_PARAMS = {
    "periodic": {"delta", "count"},
    "random": {"delta_min", "delta_max", "count", "seed"},
    "explicit": {"times", "class", "delta"},
    "none": set(),
}
_HISTORY_KINDS = ("constant", "linear", "sampled")
_INTEGRATION = {"step", "t_end", "t0"}
_ENSEMBLE = {"size", "kind", "delta", "inputs", "scale_range"}
_OUTPUTS = {"trajectory", "events", "figure"}


class ConfigError(ValueError):
    pass


def _keys(obj, allowed, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")
    return obj


def _number(value, where: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{where}: must be positive, got {value}")
    return value


def _count(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ConfigError(f"{where}: expected a nonnegative integer, got {value!r}")
    return value


def _matrix(value, where: str, shape=None) -> np.ndarray:
    try:
        arr = np.atleast_2d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: not a numeric matrix ({exc})") from None
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where}: entries must be finite")
    if shape is not None and arr.shape != shape:
        raise ConfigError(f"{where}: expected shape {shape}, got {arr.shape}")
    return arr


@dataclass
class RunConfig:
    system: ImpulsiveSystem
    system_name: str
    input: InputSignal
    schedule: ImpulseSchedule
    initial: object
    step: float
    t_end: float
    t0: float = 0.0
    lyapunov: LyapunovPair | None = None
    params: object = None
    ensemble: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seed: int = 0
    raw: dict = field(default_factory=dict)


def make_input(spec: dict, dimension: int, where: str = "input") -> InputSignal:
    _keys(spec, {"kind", "params"}, where)
    kind = spec.get("kind", "zero")
    if kind not in _INPUT_PARAMS:
        raise ConfigError(f"{where}.kind: unknown input {kind!r}; expected one of {sorted(_INPUT_PARAMS)}")
    p = _keys(spec.get("params", {}), _INPUT_PARAMS[kind], f"{where}.params")
    try:
        if kind == "zero":
            w = ZeroInput(_count(p.get("dimension", dimension), f"{where}.params.dimension"))
        elif kind == "exp_decay":
            w = ExpDecayInput(p.get("amplitude", 1.0), _number(p.get("rate", 1.0), f"{where}.params.rate"))
        elif kind == "sinusoid":
            w = SinusoidInput(
                p.get("amplitude", 1.0),
                _number(p.get("omega", 1.0), f"{where}.params.omega"),
                _number(p.get("phase", 0.0), f"{where}.params.phase"),
            )
        else:
            w = PiecewiseConstantInput(p["times"], p["levels"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if w.dimension != dimension:
        raise ConfigError(f"{where}: input dimension {w.dimension} does not match the system ({dimension})")
    return w


def make_schedule(spec: dict, t0: float, t_end: float, seed: int = 0) -> ImpulseSchedule:
    _keys(spec, {"kind", "params"}, "schedule")
    kind = spec.get("kind", "none")
    if kind not in _SCHEDULE_PARAMS:
        raise ConfigError(f"schedule.kind: unknown schedule {kind!r}; expected one of {sorted(_SCHEDULE_PARAMS)}")
    p = _keys(spec.get("params", {}), _SCHEDULE_PARAMS[kind], "schedule.params")
    try:
        if kind == "none":
            return ImpulseSchedule(())
        if kind == "periodic":
            delta = _number(p["delta"], "schedule.params.delta", positive=True)
            count = _count(p["count"], "schedule.params.count") if "count" in p else int(math.floor((t_end - t0) / delta + 1e-9))
            return gen_periodic(t0, delta, count)
        if kind == "random":
            lo = _number(p["delta_min"], "schedule.params.delta_min", positive=True)
            hi = _number(p["delta_max"], "schedule.params.delta_max", positive=True)
            count = _count(p["count"], "schedule.params.count") if "count" in p else int(math.ceil((t_end - t0) / lo))
            return gen_random_dwell(t0, lo, hi, count, int(p.get("seed", seed)))
        return ImpulseSchedule(tuple(p["times"]), p.get("class", "all"), p.get("delta"))
    except KeyError as exc:
        raise ConfigError(f"schedule.params: missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"schedule: {exc}") from None


def _initial(spec: dict | None, system: ImpulsiveSystem, name: str, t0: float):
    n = system.dimension
    if spec is None:
        if name == "example1":
            return EXAMPLE1_PHI
        if name == "example2":
            return np.concatenate([EXAMPLE2_PHI_X, EXAMPLE2_PHI_E])
        return np.ones(n)
    _keys(spec, {"kind", "values"}, "initial_history")
    kind = spec.get("kind", "constant")
    if kind not in _HISTORY_KINDS:
        raise ConfigError(f"initial_history.kind: unknown kind {kind!r}; expected one of {_HISTORY_KINDS}")
    if "values" not in spec:
        raise ConfigError("initial_history: missing 'values'")
    vals = spec["values"]
    if kind == "constant":
        v = _matrix(vals, "initial_history.values").reshape(-1)
        if v.size not in (1, n):
            raise ConfigError(f"initial_history.values: need 1 or {n} entries")
        return np.broadcast_to(v, (n,)).copy()
    if kind == "linear":
        # {"at_t0": [...], "slope": [...]}: phi(t) = at_t0 + slope (t - t0)
        if not isinstance(vals, dict):
            raise ConfigError("initial_history.values: linear history needs {at_t0, slope}")
        _keys(vals, {"at_t0", "slope"}, "initial_history.values")
        x0 = np.broadcast_to(_matrix(vals.get("at_t0", 0.0), "at_t0").reshape(-1), (n,)).copy()
        sl = np.broadcast_to(_matrix(vals.get("slope", 0.0), "slope").reshape(-1), (n,)).copy()
        return lambda t: x0 + sl * (t - t0)
    # sampled: [[t, x_1, ..., x_n], ...] covering [t0 - r, t0]
    rows = _matrix(vals, "initial_history.values")
    if rows.shape[1] != n + 1 or rows.shape[0] < 2:
        raise ConfigError(f"initial_history.values: need >= 2 rows of [t, x_1..x_{n}]")
    ts, xs = rows[:, 0], rows[:, 1:]
    if np.any(np.diff(ts) <= 0):
        raise ConfigError("initial_history.values: times must increase")
    if ts[0] > t0 - system.delay_bound + 1e-12 or abs(ts[-1] - t0) > 1e-12 * max(1.0, abs(t0)):
        raise ConfigError(f"initial_history.values: samples must span [{t0 - system.delay_bound}, {t0}]")
    hist = History(n, t0, t0 - ts[0])
    slopes = np.gradient(xs, ts, axis=0) if len(ts) > 2 else np.repeat(np.diff(xs, axis=0) / np.diff(ts)[:, None], 2, axis=0)
    hist.append_segment(ts, xs, slopes)
    return hist


def _linear_system(spec: dict) -> ImpulsiveSystem:
    _keys(spec, _LINEAR, "system")
    if "A" not in spec:
        raise ConfigError("system: linear system needs 'A'")
    A = _matrix(spec["A"], "system.A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ConfigError("system.A must be square")
    Ad = _matrix(spec.get("A_delay", np.zeros((n, n))), "system.A_delay", (n, n))
    J = _matrix(spec.get("J", np.zeros((n, n))), "system.J", (n, n))
    Jd = _matrix(spec.get("J_delay", np.zeros((n, n))), "system.J_delay", (n, n))
    B = _matrix(spec.get("B", np.zeros((n, 1))), "system.B")
    if B.shape[0] != n:
        raise ConfigError(f"system.B needs {n} rows")
    m = B.shape[1]
    D = _matrix(spec.get("D", np.zeros((n, m))), "system.D", (n, m))
    lag = _number(spec.get("lag", 0.0), "system.lag")
    jlag = _number(spec.get("jump_lag", 0.0), "system.jump_lag")
    if lag < 0 or jlag < 0:
        raise ConfigError("system: lags must be nonnegative")

    def flow(t, x, w):
        return A @ x() + Ad @ x(-lag) + B @ w

    def jump(k, t, x, w):
        return J @ x() + Jd @ x(-jlag) + D @ w

    return ImpulsiveSystem(
        n, m, flow, jump, max(lag, jlag), (lag,) if lag > 0 else (), (jlag,) if jlag > 0 else (), None,
        str(spec.get("name", "linear")),
    )


def _builtin(name: str, overrides: dict):
    _keys(overrides, _PARAMS[name], "params")
    try:
        if name == "example1":
            p = Example1Params(**{k: _number(v, f"params.{k}") for k, v in overrides.items()})
            return example1_system(p), example1_lyapunov(p), p
        kw = {}
        for k, v in overrides.items():
            kw[k] = _matrix(v, f"params.{k}") if k in ("A", "B", "C", "D") else _number(v, f"params.{k}")
        p = Example2Params(**kw)
        return example2_system(p), None, p
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"params: {exc}") from None


def parse_config(raw: dict) -> RunConfig:
    """Build a :class:`RunConfig` from a decoded JSON object; raises :class:`ConfigError`."""
    _keys(raw, _TOP, "config")
    if "system" not in raw:
        raise ConfigError("config: missing 'system'")
    sys_spec = raw["system"]
    params = raw.get("params", {})
    pair = None
    p = None
    if isinstance(sys_spec, str):
        if sys_spec not in BUILTINS:
            raise ConfigError(f"system: unknown built-in {sys_spec!r}; expected one of {BUILTINS}")
        name = sys_spec
        system, pair, p = _builtin(name, params)
    else:
        if params:
            raise ConfigError("params: overrides apply to built-in systems only")
        if not isinstance(sys_spec, dict) or sys_spec.get("kind") != "linear":
            raise ConfigError("system: expected a built-in name or {\"kind\": \"linear\", ...}")
        system = _linear_system(sys_spec)
        name = system.name

    integ = _keys(raw.get("integration", {}), _INTEGRATION, "integration")
    default_step = {"example1": 0.005, "example2": 0.002}.get(name, 0.01)
    step = _number(integ.get("step", default_step), "integration.step", positive=True)
    t0 = _number(integ.get("t0", 0.0), "integration.t0")
    t_end = _number(integ.get("t_end", t0 + 10.0), "integration.t_end")
    if t_end <= t0:
        raise ConfigError(f"integration: t_end={t_end} must exceed t0={t0}")

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed: expected an integer, got {seed!r}")

    w = make_input(raw.get("input", {"kind": "zero"}), system.input_dimension)
    schedule = make_schedule(raw.get("schedule", {"kind": "none"}), t0, t_end, seed)
    initial = _initial(raw.get("initial_history"), system, name, t0)

    use_v = raw.get("lyapunov", True)
    if not isinstance(use_v, bool):
        raise ConfigError("lyapunov: expected true or false")
    if use_v and name == "example2":
        pair = example2_lyapunov(p)
    if not use_v:
        pair = None

    ens = _keys(raw.get("ensemble", {}), _ENSEMBLE, "ensemble")
    outputs = _keys(raw.get("outputs", {}), _OUTPUTS, "outputs")
    return RunConfig(
        system, name, w, schedule, initial, step, t_end, t0, pair, p, dict(ens), dict(outputs), seed, raw
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(raw)
