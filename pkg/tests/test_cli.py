import json
import math
import pathlib
import subprocess
import sys

import pytest

from bslab.cli import ConfigError, config_hash, execute, main, validate

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
GOLDEN = pathlib.Path(__file__).resolve().parent / "golden"

SMALL = {"measure": {"type": "circle", "r": 1, "n": 64}, "command": "bound_state",
         "parameters": {"alpha": [0.4, 0.2]}}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# ---- exit codes and diagnostics


def test_run_ok_to_file(tmp_path):
    out = tmp_path / "out.csv"
    cfg = {**SMALL, "output": {"path": str(out)}}
    assert main(["run", write_cfg(tmp_path, cfg)]) == 0
    text = out.read_text()
    assert text.startswith("# tool = bslab ")
    assert "alpha,k,lambda,lambda_asym,ratio\n" in text


def test_unknown_key_exit_2(tmp_path, capsys):
    cfg = {**SMALL, "colour": "blue"}
    assert main(["run", write_cfg(tmp_path, cfg)]) == 2
    assert "colour" in capsys.readouterr().err


def test_bad_parameter_names_field(tmp_path, capsys):
    cfg = {**SMALL, "measure": {"type": "circle", "r": -1, "n": 64}}
    assert main(["run", write_cfg(tmp_path, cfg)]) == 2
    assert "field measure.r" in capsys.readouterr().err
    cfg = {**SMALL, "parameters": {"alpha": [0.4, "x"]}}
    assert main(["run", write_cfg(tmp_path, cfg)]) == 2
    assert "parameters.alpha[1]" in capsys.readouterr().err


def test_json_syntax_error_names_line(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "measure": {"type": "circle",\n  "r": 1 "n": 4}\n}\n')
    assert main(["run", str(p)]) == 2
    assert "broken.json:3:" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 2


def test_increasing_sweep_rejected():
    cfg = {"measure": SMALL["measure"], "command": "perturbation",
           "parameters": {"k": [1e-5, 1e-3]}}
    with pytest.raises(ConfigError, match="decreasing"):
        validate(cfg)


@pytest.mark.filterwarnings("ignore::bslab.bskernel.AccuracyWarning")
def test_numerical_failure_exit_3(tmp_path, capsys):
    cfg = {**SMALL, "parameters": {"alpha": [2000.0]}}
    assert main(["run", write_cfg(tmp_path, cfg)]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_flags_build_config(capsys):
    rc = main(["run", "--measure", '{"type":"circle","r":1,"n":32}',
               "--command", "gamma_sweep", "--k", "0.5", "0.1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "k,gamma,iterations,residual\n" in out
    rows = out.strip().splitlines()[-2:]
    assert [float(r.split(",")[0]) for r in rows] == [0.5, 0.1]


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "bslab.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("bslab ")


# ---- config hash


def test_hash_ignores_output_and_int_float():
    a = validate(SMALL)
    b = validate({**SMALL, "output": {"path": "elsewhere.csv", "format": "json"}})
    c = validate({**SMALL, "measure": {"type": "circle", "r": 1.0, "n": 64}})
    assert config_hash(a) == config_hash(b) == config_hash(c)


def test_hash_tracks_semantic_fields():
    base = config_hash(validate(SMALL))
    variants = [
        {**SMALL, "measure": {"type": "circle", "r": 1, "n": 65}},
        {**SMALL, "parameters": {"alpha": [0.4, 0.21]}},
        {**SMALL, "command": "norm_limit"},
    ]
    hashes = {config_hash(validate(v)) for v in variants}
    assert base not in hashes and len(hashes) == 3


def test_defaults_enter_hash():
    cfg = {"measure": SMALL["measure"], "command": "kato_check", "parameters": {"eps": [0.1]}}
    explicit = {**cfg, "parameters": {"eps": [0.1], "drop": 0.5}}
    assert config_hash(validate(cfg)) == config_hash(validate(explicit))


# ---- determinism and golden files


def test_repeated_runs_byte_identical():
    assert execute(SMALL) == execute(SMALL)


def test_thread_count_does_not_change_output(monkeypatch):
    cfg = {"measure": SMALL["measure"], "command": "gamma_sweep",
           "parameters": {"k": [1.0, 0.3, 0.1, 0.01]}}
    one = execute(cfg)
    monkeypatch.setenv("BSLAB_THREADS", "4")
    assert execute(cfg) == one


def _split(text):
    head = [ln for ln in text.splitlines() if ln.startswith("#")]
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return head, body


def _close(a, b, rtol=1e-10):
    fa, fb = float(a), float(b)
    if math.isnan(fa) or math.isnan(fb):
        return math.isnan(fa) and math.isnan(fb)
    return abs(fa - fb) <= rtol * max(abs(fa), abs(fb))


@pytest.mark.parametrize("name", ["circle_bound_state.csv", "circle_convergence.csv"])
def test_golden_csv(name):
    cfg = json.loads((CONFIGS / name.replace(".csv", ".json")).read_text())
    got_head, got = _split(execute(cfg))
    want_head, want = _split((GOLDEN / name).read_text())
    assert got_head[:3] == want_head[:3]  # tool, hash, measure
    assert got[0] == want[0]
    assert len(got) == len(want)
    for g, w in zip(got[1:], want[1:]):
        assert all(_close(x, y) for x, y in zip(g.split(","), w.split(","))), (g, w)


def test_golden_cmu_json():
    cfg = json.loads((CONFIGS / "circle_cmu.json").read_text())
    got = json.loads(execute(cfg))
    want = json.loads((GOLDEN / "circle_cmu.json").read_text())
    assert got["provenance"] == want["provenance"]
    for key in ("mu_total", "r_form", "c_mu"):
        assert _close(got[key], want[key]), key


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    validate(json.loads(path.read_text()))


def test_eigenfunction_command_csv(tmp_path):
    out = tmp_path / "f.csv"
    cfg = {"measure": SMALL["measure"], "command": "eigenfunction",
           "parameters": {"alpha": 0.4, "nx": 4, "ny": 3},
           "output": {"path": str(out)}}
    assert main(["run", write_cfg(tmp_path, cfg)]) == 0
    lines = out.read_text().splitlines()
    assert "# x y f" in lines
    assert len([ln for ln in lines if not ln.startswith("#")]) == 12
    assert any(ln.startswith("# norms_comparable = ") for ln in lines)
