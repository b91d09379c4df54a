import json
from pathlib import Path

import numpy as np
import pytest

from impiss import History, simulate
from impiss.config import ConfigError, load_config, make_input, make_schedule, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    cfg = load_config(path)
    assert cfg.t_end > cfg.t0
    assert cfg.system.dimension >= 1


def test_example1_defaults():
    cfg = parse_config({"system": "example1"})
    assert cfg.step == 0.005 and cfg.t_end == 10.0
    assert cfg.initial == 1.0
    assert cfg.lyapunov is not None
    assert len(cfg.schedule) == 0


def test_example2_defaults_build_pair_and_error_state():
    cfg = parse_config({"system": "example2", "schedule": {"kind": "periodic", "params": {"delta": 0.01}}})
    assert cfg.step == 0.002
    assert list(cfg.initial) == [0.1, 0.1, 0.1, 0.5, -0.5, 0.5]
    assert cfg.lyapunov.kappa == pytest.approx(0.02 * 27 / 7)
    assert len(cfg.schedule) == 1000


def test_lyapunov_can_be_disabled():
    assert parse_config({"system": "example1", "lyapunov": False}).lyapunov is None


def test_unknown_keys_rejected_everywhere():
    bad = [
        {"system": "example1", "colour": 1},
        {"system": "example1", "params": {"zeta": 1}},
        {"system": "example1", "input": {"kind": "sinusoid", "params": {"freq": 1}}},
        {"system": "example1", "schedule": {"kind": "periodic", "params": {"delta": 1, "offset": 0}}},
        {"system": "example1", "integration": {"dt": 0.1}},
        {"system": "example1", "ensemble": {"members": 3}},
        {"system": "example1", "outputs": {"plot": "x.png"}},
        {"system": {"kind": "linear", "A": [[-1]], "Q": 1}},
    ]
    for raw in bad:
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(raw)


def test_structural_errors():
    cases = [
        ({}, "missing 'system'"),
        ({"system": "example3"}, "unknown built-in"),
        ({"system": "example1", "integration": {"t_end": -1.0}}, "must exceed"),
        ({"system": "example1", "integration": {"step": 0}}, "positive"),
        ({"system": "example1", "seed": "x"}, "seed"),
        ({"system": "example1", "lyapunov": "yes"}, "lyapunov"),
        ({"system": "example1", "input": {"kind": "chirp"}}, "unknown input"),
        ({"system": "example1", "schedule": {"kind": "poisson"}}, "unknown schedule"),
        ({"system": "example1", "schedule": {"kind": "periodic"}}, "missing"),
        ({"system": {"kind": "linear"}}, "needs 'A'"),
        ({"system": {"kind": "linear", "A": [[1, 2]]}}, "square"),
        ({"system": {"kind": "linear", "A": [[-1]]}, "params": {"a": 1}}, "built-in"),
        ({"system": "example1", "params": {"tau": -1}}, "params"),
        ({"system": "example1", "initial_history": {"kind": "constant"}}, "values"),
        ({"system": "example1", "input": {"kind": "zero", "params": {"dimension": 2}}}, "dimension"),
    ]
    for raw, msg in cases:
        with pytest.raises(ConfigError, match=msg):
            parse_config(raw)


def test_linear_system_round_trip():
    cfg = parse_config({
        "system": {"kind": "linear", "A": [[-1.0]], "J": [[-0.5]], "B": [[1.0]]},
        "schedule": {"kind": "explicit", "params": {"times": [0.5]}},
        "initial_history": {"kind": "constant", "values": [2.0]},
        "integration": {"step": 0.01, "t_end": 1.0},
    })
    traj = simulate(cfg.system, cfg.initial, cfg.input, cfg.schedule, cfg.t_end, cfg.step)
    assert traj.final_state[0] == pytest.approx(2.0 * np.exp(-1.0) * 0.5, rel=1e-9)


def test_linear_system_with_delay_lags():
    cfg = parse_config({"system": {"kind": "linear", "A": [[-1.0]], "A_delay": [[0.2]], "lag": 0.5, "jump_lag": 0.25}})
    assert cfg.system.delay_bound == 0.5
    assert cfg.system.flow_lags == (0.5,) and cfg.system.jump_lags == (0.25,)


def test_history_kinds():
    lin = parse_config({"system": "example1", "initial_history": {"kind": "linear", "values": {"at_t0": [1.0], "slope": [2.0]}}})
    assert lin.initial(-0.5)[0] == 0.0
    rows = [[-1.0, 0.0], [-0.5, 0.5], [0.0, 1.0]]
    samp = parse_config({"system": "example1", "initial_history": {"kind": "sampled", "values": rows}})
    assert isinstance(samp.initial, History)
    assert samp.initial.eval(-0.25)[0] == pytest.approx(0.75)
    with pytest.raises(ConfigError, match="span"):
        parse_config({"system": "example1", "initial_history": {"kind": "sampled", "values": rows[1:]}})


def test_make_input_kinds():
    assert make_input({"kind": "exp_decay", "params": {"amplitude": 5.0, "rate": 1.0}}, 1)(0.0)[0] == 5.0
    w = make_input({"kind": "piecewise_constant", "params": {"times": [0.0, 1.0], "levels": [[1.0], [2.0]]}}, 1)
    assert w(1.5)[0] == 2.0
    with pytest.raises(ConfigError):
        make_input({"kind": "piecewise_constant", "params": {"times": [0.0]}}, 1)


def test_make_schedule_kinds():
    assert len(make_schedule({"kind": "periodic", "params": {"delta": 0.5}}, 0.0, 2.0)) == 4
    a = make_schedule({"kind": "random", "params": {"delta_min": 0.1, "delta_max": 0.2}}, 0.0, 1.0, seed=5)
    b = make_schedule({"kind": "random", "params": {"delta_min": 0.1, "delta_max": 0.2}}, 0.0, 1.0, seed=5)
    assert a.times == b.times
    ex = make_schedule({"kind": "explicit", "params": {"times": [1.0, 3.0], "class": "inf", "delta": 2.0}}, 0.0, 4.0)
    assert ex.kind == "inf" and ex.delta == 2.0


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"system": "example1"}))
    assert load_config(good).system_name == "example1"
