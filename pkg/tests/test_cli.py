import json

import pytest

from vibdsde.cli import main

BASE = {
    "domain": {"kind": "half_space", "dim": 1},
    "coefficients": {"chi": {"name": "cosine", "a": 1.0, "k": 1.5, "c": 0.5},
                     "f": {"name": "linear", "a": 0.3}, "g": {"name": "constant", "c": 0.2}},
    "constraints": {"phi": {"kind": "indicator_interval", "lo": -1.0, "hi": 1.2}},
    "x0": [0.1],
    "grid": {"T": 1.0, "N": 20},
    "monte_carlo": {"M": 400, "seed": 3},
    "field": {"times": [0.0, 0.5], "points": [[0.0], [0.5]]},
    "verify": {"checks": ["moreau_yosida", "modulus", "coefficients", "comparison"], "draws": 500,
               "comparison": {"chi": {"name": "cosine", "a": 1.0, "k": 1.5, "c": 1.5}}},
    "rate": {"eps": [0.2, 0.1, 0.05]},
}
OUTPUT = {"forward": "forward.csv", "solve": "solution.csv", "field": "field.csv", "verify": "verify.csv",
          "rate": "rate.csv"}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=2))
    return str(p)


def _run(tmp_path, cmd, cfg=BASE, out="out", extra=()):
    code = main([cmd, _write(tmp_path, cfg), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_solve_writes_outputs_and_manifest(tmp_path, capsys):
    code, out = _run(tmp_path, "solve")
    assert code == 0
    assert (out / "solution.csv").exists() and (out / "solution.json").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["seed"] == 3
    assert set(man["outputs"]) == {"solution.csv", "solution.json"}
    header = (out / "solution.csv").read_text().splitlines()[0]
    assert header == "t,y_mean,y_std_err,z1_mean,u_mean,v_mean"


def test_unknown_key_exits_2_naming_key_and_line(tmp_path, capsys):
    cfg = dict(BASE, solver={"modee": "resolvent"})
    code, _ = _run(tmp_path, "solve", cfg)
    err = capsys.readouterr().err
    assert code == 2
    assert "modee" in err and "line" in err


def test_bad_json_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"grid": {"N": 10,}}')
    assert main(["solve", str(p)]) == 2
    assert "line 1" in capsys.readouterr().err


@pytest.mark.parametrize("cmd", sorted(OUTPUT))
def test_outputs_identical_across_runs_and_threads(tmp_path, cmd):
    _, a = _run(tmp_path, cmd, out="a", extra=("--threads", "1"))
    _, b = _run(tmp_path, cmd, out="b", extra=("--threads", "3"))
    _, c = _run(tmp_path, cmd, out="c", extra=("--threads", "1"))
    fa = (a / OUTPUT[cmd]).read_bytes()
    assert fa == (b / OUTPUT[cmd]).read_bytes() == (c / OUTPUT[cmd]).read_bytes()
    assert len(fa.splitlines()) > 1


def test_manifest_config_reproduces_run(tmp_path):
    _, first = _run(tmp_path, "field", out="first", extra=("--paths", "300", "--steps", "10", "--seed", "9"))
    man = json.loads((first / "manifest.json").read_text())
    assert man["config"]["monte_carlo"]["M"] == 300 and man["config"]["grid"]["N"] == 10
    cfg = dict(man["config"])
    cfg.pop("output")
    code, second = _run(tmp_path, "field", cfg, out="second")
    assert code == 0
    assert (first / "field.csv").read_bytes() == (second / "field.csv").read_bytes()
    assert json.loads((second / "manifest.json").read_text())["outputs"] == man["outputs"]


def test_seed_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("VIBDSDE_SEED", "11")
    _, env = _run(tmp_path, "forward", out="env")
    assert json.loads((env / "manifest.json").read_text())["seed"] == 11
    _, flag = _run(tmp_path, "forward", out="flag", extra=("--seed", "12"))
    assert json.loads((flag / "manifest.json").read_text())["seed"] == 12
    monkeypatch.delenv("VIBDSDE_SEED")
    _, cfg = _run(tmp_path, "forward", out="cfg")
    assert json.loads((cfg / "manifest.json").read_text())["seed"] == 3
    assert (env / "forward.csv").read_bytes() != (cfg / "forward.csv").read_bytes()


def test_verify_failure_exits_4(tmp_path):
    # increasing g breaks the one-sided condition
    cfg = dict(BASE, coefficients=dict(BASE["coefficients"], g={"name": "linear", "a": 1.0}),
               verify={"checks": ["coefficients"]})
    code, out = _run(tmp_path, "verify", cfg)
    assert code == 4
    assert json.loads((out / "manifest.json").read_text())["status"] == "verification_failed"
    assert (out / "verify.csv").read_text().splitlines()[1].startswith("coefficient_moduli,0,")


def test_runtime_error_recorded_in_manifest(tmp_path):
    cfg = dict(BASE, verify={"checks": ["comparison"], "comparison": {"chi": {"name": "constant", "c": -5.0}}})
    code, out = _run(tmp_path, "verify", cfg)
    man = json.loads((out / "manifest.json").read_text())
    assert code == 4 and man["status"] == "error"
    assert man["error"]["type"] == "HypothesisViolation"


def test_formats_option(tmp_path):
    cfg = dict(BASE, output={"formats": ["json"]})
    code, out = _run(tmp_path, "forward", cfg)
    assert code == 0 and (out / "forward.json").exists() and not (out / "forward.csv").exists()
