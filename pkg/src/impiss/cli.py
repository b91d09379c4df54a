"""Command-line front end: simulate, certify, verify-iss, sweep.

Machine-readable payloads (CSV, JSON) go to standard output or to the paths
given; diagnostics go to standard error.  Exit codes:

    0  success / admissible / pass
    1  certificate not admissible at the queried dwell time
    2  configuration or precondition error
    3  divergence during simulation
    4  no ISS witness found
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .certificates import (
    CertificateInputs,
    ParameterError as CertParameterError,
    PreconditionError,
    certify,
    example2_derive,
    remark3_compare,
)
from .config import ConfigError, RunConfig, load_config, make_input
from .integrator import DivergenceError, simulate
from .lyapunov import series
from .model import ImpulseSchedule, ParameterError, ScheduleError, ZeroInput
from .scenarios import Example1Params
from .verifier import (
    EnsembleSpec,
    FitError,
    Member,
    build_ensemble,
    check_envelope,
    fit_envelope,
    run_ensemble,
    zero_input_convergence,
)

__all__ = ["main", "build_parser", "format_number", "write_csv"]

log = logging.getLogger("impiss")

EXIT_OK = 0
EXIT_NOT_ADMISSIBLE = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_NO_WITNESS = 4

SWEEP_PARAMETERS = ("delta", "epsilon", "kappa", "rho1", "rho2", "mu")


def format_number(v) -> str:
    """15 significant digits; ``nan``/``inf`` spelled the way Python reads them back."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".15g")


def write_csv(target, header: list[str], rows) -> None:
    """Comma-delimited, header first, LF line endings."""
    own = not hasattr(target, "write")
    if own:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
    fh = open(target, "w", newline="") if own else target
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) if not isinstance(v, str) else v for v in row])
    finally:
        if own:
            fh.close()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _emit_json(payload: dict, out: str | None) -> None:
    # non-finite floats are written as JSON strings so the output stays strict
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return format_number(o)
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    text = json.dumps(clean(payload), indent=2, default=_json_default) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# simulate


def trajectory_table(cfg: RunConfig, traj) -> tuple[list[str], np.ndarray]:
    times, states, _ = traj.grid()
    pre = traj.pre_jump_mask()
    w = traj.input
    inputs = np.vstack([w.left_limit(t) if p else w(t) for t, p in zip(times, pre)])
    n, m = cfg.system.dimension, cfg.system.input_dimension
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"w_{j + 1}" for j in range(m)] + ["norm_x"]
    cols = [times[:, None], states, inputs, traj.norms(states)[:, None]]
    if cfg.lyapunov is not None:
        data = series(cfg.lyapunov, traj)
        header += ["V", "V1", "V2"]
        cols += [data.V[:, None], data.V1[:, None], data.V2[:, None]]
    return header, np.hstack(cols)


def events_table(traj) -> tuple[list[str], list[list[float]]]:
    project = traj.system.project
    rows = []
    for ev in traj.events:
        pre, post = project(ev.pre), project(ev.post)
        rows.append([ev.k, ev.t, np.linalg.norm(pre), np.linalg.norm(post), np.linalg.norm(post - pre)])
    return ["k", "t_k", "pre_norm", "post_norm", "jump_norm"], rows


def _events_path(traj_path: str) -> str:
    p = Path(traj_path)
    return str(p.with_name(p.stem + "_events" + (p.suffix or ".csv")))


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    traj = simulate(cfg.system, cfg.initial, cfg.input, cfg.schedule, cfg.t_end, cfg.step, cfg.t0)
    header, table = trajectory_table(cfg, traj)
    ev_header, ev_rows = events_table(traj)
    out = args.out or cfg.outputs.get("trajectory")
    events_out = cfg.outputs.get("events") or (_events_path(out) if out else None)
    if out:
        write_csv(out, header, table)
    else:
        write_csv(sys.stdout, header, table)
    if events_out:
        write_csv(events_out, ev_header, ev_rows)
    figure = args.figure or cfg.outputs.get("figure")
    if figure:
        from .plotting import render_trajectory

        V = table[:, header.index("V")] if "V" in header else None
        render_trajectory(figure, table[:, 0], table[:, header.index("norm_x")], [ev.t for ev in traj.events], V,
                          title=cfg.system_name)
        log.info("figure written to %s", figure)
    if out:
        norms = table[:, header.index("norm_x")]
        _emit_json({
            "trajectory": out,
            "events": events_out,
            "figure": figure,
            "rows": int(len(table)),
            "impulses": len(traj.events),
            "initial_norm": traj.initial_norm,
            "final_norm": float(norms[-1]),
            "sup_norm": float(norms.max()),
        }, None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# certify


def _config_certificate(cfg: RunConfig, delta: float | None) -> tuple[str, CertificateInputs, dict]:
    """Certificate inputs implied by a built-in scenario."""
    if cfg.system_name == "example1":
        p = cfg.params or Example1Params()
        return "1", CertificateInputs(p.mu, p.rho1, p.rho2, None, p.tau), {}
    if cfg.system_name == "example2":
        p = cfg.params
        der = example2_derive(p.A, p.C, p.L, p.r, p.d, p.eps, delta=delta)
        return "3", der.report.inputs, {"example2": der.to_dict()}
    raise ConfigError(f"no certificate constants are known for system {cfg.system_name!r}; pass them as flags")


def _schedule_delta(cfg: RunConfig | None) -> float | None:
    if cfg is None:
        return None
    return cfg.schedule.delta


def _certificate_inputs(args) -> tuple[str, CertificateInputs, float | None, dict]:
    cfg = load_config(args.config) if args.config else None
    delta = args.delta if args.delta is not None else _schedule_delta(cfg)
    extra: dict = {}
    if cfg is not None:
        theorem, base, extra = _config_certificate(cfg, delta)
    else:
        theorem, base = None, None
    theorem = str(args.theorem) if args.theorem is not None else theorem
    if theorem is None:
        raise ConfigError("--theorem is required without a built-in config")

    def pick(flag, attr, default=None):
        if flag is not None:
            return flag
        return getattr(base, attr) if base is not None else default

    mu, rho1, rho2 = pick(args.mu, "mu"), pick(args.rho1, "rho1"), pick(args.rho2, "rho2")
    missing = [n for n, v in (("--mu", mu), ("--rho1", rho1), ("--rho2", rho2)) if v is None]
    if theorem.upper().lstrip("T") == "4" and mu is None:
        mu = 0.0
        missing = [m for m in missing if m != "--mu"]
    if missing:
        raise ConfigError(f"missing {', '.join(missing)} for theorem {theorem}")
    inputs = CertificateInputs(mu, rho1, rho2, pick(args.kappa, "kappa"), pick(args.r, "r", 0.0))
    return theorem, inputs, delta, extra


def cmd_certify(args) -> int:
    theorem, inputs, delta, extra = _certificate_inputs(args)
    try:
        report = certify(theorem, inputs, delta)
    except PreconditionError as exc:
        _emit_json({"theorem": exc.theorem, "precondition_failure": exc.violations}, args.out)
        log.error("%s", exc)
        return EXIT_CONFIG
    payload = report.to_dict()
    if report.theorem == "T3" and inputs.rho2 == 0:
        cmp = remark3_compare(inputs)
        payload["remark3"] = {"ours": cmp.ours, "theirs": cmp.theirs, "ratio": cmp.ratio, "note": cmp.note}
    payload.update(extra)
    _emit_json(payload, args.out)
    ok = report.admissible_at_query
    if ok is None:
        ok = report.admissible != "empty"
    return EXIT_OK if ok else EXIT_NOT_ADMISSIBLE


# ---------------------------------------------------------------------------
# verify-iss


def _ensemble_spec(cfg: RunConfig, size: int, seed: int) -> EnsembleSpec:
    ens = cfg.ensemble
    m = cfg.system.input_dimension
    if "inputs" in ens:
        if not isinstance(ens["inputs"], list) or not ens["inputs"]:
            raise ConfigError("ensemble.inputs: expected a non-empty list")
        inputs = {f"{spec.get('kind', 'zero')}{i}": make_input(spec, m, f"ensemble.inputs[{i}]")
                  for i, spec in enumerate(ens["inputs"])}
    else:
        inputs = {"zero": ZeroInput(m)}
        if not isinstance(cfg.input, ZeroInput):
            inputs["configured"] = cfg.input
    scale_range = tuple(ens.get("scale_range", (0.5, 1.5)))
    if len(scale_range) != 2 or not 0 < scale_range[0] <= scale_range[1]:
        raise ConfigError("ensemble.scale_range: expected [lo, hi] with 0 < lo <= hi")
    kind = ens.get("kind", cfg.schedule.kind)
    delta = ens.get("delta", cfg.schedule.delta)
    if len(cfg.schedule) == 0 and "kind" not in ens:
        # impulse-free configuration: only the histories vary
        rng = np.random.default_rng(seed)
        scales = rng.uniform(*scale_range, size=size)
        members = []
        for i, a in enumerate(scales):
            phi = _scaled(cfg.initial, a)
            for name, w in inputs.items():
                members.append(Member(phi, w, ImpulseSchedule(()), f"{name}#{i}"))
        return EnsembleSpec(members, cfg.t_end, cfg.step, cfg.t0)
    if kind not in ("inf", "sup") or delta is None:
        raise ConfigError("ensemble: need a schedule class 'inf' or 'sup' with a delta")
    return build_ensemble(cfg.initial, inputs, kind, float(delta), size, cfg.t_end, cfg.step, seed, cfg.t0,
                          scale_range)


def _scaled(initial, a: float):
    if callable(initial):
        return lambda t, f=initial: a * np.asarray(f(t))
    return a * np.asarray(initial, dtype=float)


def cmd_verify_iss(args) -> int:
    cfg = load_config(args.config)
    size = args.ensemble if args.ensemble is not None else int(cfg.ensemble.get("size", 5))
    if size < 1:
        raise ConfigError(f"ensemble size must be at least 1, got {size}")
    seed = args.seed if args.seed is not None else cfg.seed
    spec = _ensemble_spec(cfg, size, seed)
    runs = run_ensemble(cfg.system, spec)
    per_run = [{"label": r.label, "phi_norm": r.phi_norm, "final_norm": r.final_norm} for r in runs]
    zero = [r for r in runs if r.zero_input]
    payload: dict = {"ensemble_size": size, "members": len(runs), "seed": seed}
    if zero:
        payload["zero_input"] = zero_input_convergence(zero)
    try:
        env = fit_envelope(runs)
    except FitError as exc:
        payload.update({"envelope": None, "per_run": per_run, "pass": False, "error": str(exc)})
        _emit_json(payload, args.out)
        log.error("%s", exc)
        return EXIT_NO_WITNESS
    passed = True
    for row, r in zip(per_run, runs):
        rep = check_envelope(r.trajectory, env, r.phi_norm)
        row.update({"pass": rep.passed, "max_violation": rep.max_violation, "time_of_max": rep.time_of_max})
        passed &= rep.passed
    payload.update({"envelope": env.to_dict(), "per_run": per_run, "pass": passed})
    _emit_json(payload, args.out)
    return EXIT_OK if passed else EXIT_NO_WITNESS


# ---------------------------------------------------------------------------
# sweep


def _sweep_margin(args, cfg: RunConfig | None, param: str, value: float) -> float:
    a = argparse.Namespace(**vars(args))
    if param == "delta":
        a.delta = value
    elif param == "epsilon":
        if cfg is None or cfg.system_name not in ("example1", "example2"):
            raise ConfigError("sweeping epsilon needs a built-in config")
        raw = dict(cfg.raw)
        raw["params"] = dict(raw.get("params", {}), eps=value)
        from .config import parse_config

        a.config = None
        delta = a.delta if a.delta is not None else cfg.schedule.delta
        theorem, base, _ = _config_certificate(parse_config(raw), delta)
        a.theorem = a.theorem if a.theorem is not None else theorem
        for k in ("mu", "rho1", "rho2", "kappa", "r"):
            if getattr(a, k) is None:
                setattr(a, k, getattr(base, k))
        a.delta = delta
        return _margin(a)
    else:
        setattr(a, param, value)
    return _margin(a)


def _margin(a) -> float:
    theorem, inputs, delta, _ = _certificate_inputs(a)
    if theorem.upper().lstrip("T") != "4" and delta is None:
        raise ConfigError("a dwell time is needed: pass --delta or configure a schedule")
    try:
        report = certify(theorem, inputs, delta)
    except PreconditionError as exc:
        log.warning("precondition failure at this grid point: %s", exc)
        return math.nan
    if report.admissible == "empty":
        return -math.inf if report.margin_at_query is None else report.margin_at_query
    return report.margin_at_query


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMETERS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; expected one of {SWEEP_PARAMETERS}")
    lo, hi = args.range
    if args.steps < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise ConfigError("sweep needs --steps >= 1 and a finite range lo <= hi")
    values = np.array([lo]) if args.steps == 1 else np.linspace(lo, hi, args.steps)
    cfg = load_config(args.config) if args.config else None
    rows = []
    if args.metric == "final_norm":
        if cfg is None or args.param != "delta":
            raise ConfigError("final_norm sweeps need --config and param 'delta'")
        for v in values:
            sched = cfg.schedule
            count = int(math.floor((cfg.t_end - cfg.t0) / v + 1e-9))
            times = tuple(cfg.t0 + k * v for k in range(1, count + 1))
            traj = simulate(cfg.system, cfg.initial, cfg.input, ImpulseSchedule(times, sched.kind if sched.kind != "all" else "inf", v),
                            cfg.t_end, cfg.step, cfg.t0)
            rows.append([v, float(traj.norms()[-1])])
    else:
        run_args = argparse.Namespace(**vars(args))
        for v in values:
            rows.append([v, _sweep_margin(run_args, cfg, args.param, float(v))])
    header = [args.param, args.metric]
    if args.out:
        write_csv(args.out, header, rows)
    else:
        write_csv(sys.stdout, header, rows)
    if args.figure:
        from .plotting import render_sweep

        arr = np.array(rows, dtype=float)
        render_sweep(args.figure, arr[:, 0], arr[:, 1], args.param, args.metric)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _add_common(p: argparse.ArgumentParser, config_required: bool) -> None:
    p.add_argument("--config", required=config_required, help="JSON run configuration")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")


def _add_certificate_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theorem", choices=["1", "2", "3", "4"])
    p.add_argument("--mu", type=float)
    p.add_argument("--rho1", type=float)
    p.add_argument("--rho2", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--delta", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impiss", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a configured system, write trajectory and events CSV")
    _add_common(p, True)
    p.add_argument("--figure", help="also render a PNG/PDF figure to this path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="evaluate a dwell-time certificate, JSON to standard output")
    _add_common(p, False)
    _add_certificate_flags(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify-iss", help="fit and check an exponential ISS envelope over an ensemble")
    _add_common(p, True)
    p.add_argument("--ensemble", type=int, default=None, help="number of random schedules")
    p.set_defaults(func=cmd_verify_iss)

    p = sub.add_parser("sweep", help="certificate margin or final norm over a parameter grid")
    _add_common(p, False)
    _add_certificate_flags(p)
    p.add_argument("--param", required=True, help="one of " + ", ".join(SWEEP_PARAMETERS))
    p.add_argument("--range", nargs=2, type=float, required=True, metavar=("LO", "HI"))
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--metric", choices=["margin", "final_norm"], default="margin")
    p.add_argument("--figure", help="also render the sweep curve to this path")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except DivergenceError as exc:
        log.error("%s", exc)
        return EXIT_DIVERGED
    except (ConfigError, ParameterError, ScheduleError, CertParameterError, PreconditionError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
