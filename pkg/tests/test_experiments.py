import json
import subprocess
import sys

import pytest

from treecp import cli, experiments
from treecp.errors import ConfigError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


EXT = """
lambda = 1.0
horizon = 1e4
trials = 300
seed = 5
[topology]
d = 2
n = 1
"""


def test_load_toml_and_json(tmp_path):
    cfg = experiments.load_config(write(tmp_path, "a.toml", EXT), "extinction")
    assert (cfg.lam, cfg.trials, cfg.seed, cfg.topology) == (1.0, 300, 5, {"d": 2, "n": 1})
    j = write(tmp_path, "a.json", json.dumps({"lambda": 1.0, "horizon": 1e4, "trials": 300, "seed": 5,
                                               "topology": {"d": 2, "n": 1}}))
    assert experiments.load_config(j, "extinction").config_hash() == cfg.config_hash()


@pytest.mark.parametrize("text,field", [
    ("lambda = -1\n[topology]\nd = 2\nn = 2\n", "lambda"),
    ("lambda = 1\ntrials = 1.5\n[topology]\nd = 2\nn = 2\n", "trials"),
    ("lambda = 1\nbogus = 1\n[topology]\nd = 2\nn = 2\n", "bogus"),
    ("lambda = 1\n[topology]\nd = 1\nn = 2\n", "topology"),
    ("lambda = 1\n[topology]\nd = 2\nn = 2\n[params]\ntheta = 0.1\n", "params"),
    ("lambda = 1\n[topology]\nd = 2\n", "topology"),
    ("lambda = [1\n", "config"),
])
def test_config_errors(tmp_path, text, field):
    with pytest.raises(ConfigError) as e:
        experiments.load_config(write(tmp_path, "c.toml", text), "extinction")
    assert e.value.field == field


def test_kind_specific_validation():
    with pytest.raises(ConfigError):
        experiments.config_from_dict({"lambda": 1.0, "options": {"ns": [0]}}, "bstar")
    with pytest.raises(ConfigError):
        experiments.config_from_dict({"lambda": 1.0, "topology": {"d": 2, "n": 3}}, "coupling")
    with pytest.raises(ConfigError):
        experiments.config_from_dict({}, "nope")


def test_override_precedence(tmp_path):
    cfg = experiments.load_config(write(tmp_path, "a.toml", EXT), "extinction")
    env = {"TREECP_SEED": "9", "TREECP_TRIALS": "50"}
    experiments.apply_overrides(cfg, env=env)
    assert (cfg.seed, cfg.trials) == (9, 50)
    experiments.apply_overrides(cfg, seed=3, trials=7, env=env)
    assert (cfg.seed, cfg.trials) == (3, 7)
    with pytest.raises(ConfigError):
        experiments.apply_overrides(cfg, env={"TREECP_SEED": "x"})
    with pytest.raises(ConfigError):
        experiments.apply_overrides(cfg, trials=0, env={})


def test_hash_ignores_workers_and_out(tmp_path):
    a = experiments.load_config(write(tmp_path, "a.toml", EXT), "extinction")
    b = experiments.load_config(write(tmp_path, "a.toml", EXT), "extinction")
    experiments.apply_overrides(b, workers=7, out="elsewhere", env={})
    assert a.config_hash() == b.config_hash()
    experiments.apply_overrides(b, seed=6, env={})
    assert a.config_hash() != b.config_hash()


def test_cli_run_and_plotdata(tmp_path, capsys):
    cfg = write(tmp_path, "a.toml", EXT)
    out = tmp_path / "o"
    assert cli.main(["extinction", "--config", str(cfg), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["kind"] == "extinction" and set(man["outputs"]) == {"trials.csv", "summary.json"}
    lines = (out / "trials.csv").read_text().splitlines()
    assert lines[0] == "trial,seed,tau,censored" and len(lines) == 301
    assert cli.main(["plotdata", "--manifest", str(out / "manifest.json")]) == 0
    assert (out / "survival.tsv").exists() and (out / "ks_cdf.tsv").exists()


def test_plotdata_header_only(tmp_path):
    cfg = write(tmp_path, "a.toml", "lambda = 1.0\ntrials = 5\n[topology]\nd = 2\nn = 2\n"
                                    "[options]\nstart = \"empty\"\n")
    out = tmp_path / "o"
    assert cli.main(["extinction", "--config", str(cfg), "--out", str(out)]) == 0
    # empty start: every tau is 0 and uncensored
    assert cli.main(["plotdata", "--manifest", str(out / "manifest.json")]) == 0
    assert (out / "ks_cdf.tsv").read_text() == "x\tecdf\texp1_cdf\n"
    m = experiments.RunManifest.load(out / "manifest.json")
    (out / "trials.csv").write_text("trial,seed,tau,censored\n")
    experiments.emit_plotdata(m)
    assert (out / "survival.tsv").read_text() == "t\tsurvival\n"
    assert (out / "ks_cdf.tsv").read_text() == "x\tecdf\texp1_cdf\n"


def test_cli_errors(tmp_path, capsys):
    bad = write(tmp_path, "b.toml", "lambda = -1\n[topology]\nd = 2\nn = 2\n")
    assert cli.main(["extinction", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["field"] == "lambda"
    assert json.loads((tmp_path / "o" / "error.json").read_text())["error"] == "ConfigError"
    with pytest.raises(SystemExit) as e:
        cli.main(["frobnicate"])
    assert e.value.code == 2
    assert cli.main(["extinction"]) == 2
    assert cli.main(["plotdata", "--manifest", str(tmp_path / "missing.json")]) == 1


@pytest.mark.parametrize("kind,text", [
    ("duality-sweep", "lambda = 2.0\ntrials = 20\n[topology]\nd = 2\nn = 2\n"),
    ("rwchain", "trials = 2000\n[options]\nn = 20\n"),
    ("supersolution", "[options]\nn_max = 5\n"),
    ("bstar", "lambda = 0.3\ntrials = 30\n[options]\nns = [2, 3, 4]\n"),
    ("coupling", "lambda = 3.0\ntrials = 20\n[topology]\nd = 2\nn = 2\n[options]\nt_check = [1, 2]\n"),
    ("spread", '{"lambda": 4.0, "trials": 20, "topology": {"d": 2, "n": 4}, "options": {"n1": 1}}'),
    ("phi", "lambda = 4.0\ntrials = 20\n[topology]\nd = 2\nn = 3\n"),
    ("gamma-probe", "lambda = 4.0\ntrials = 5\n[topology]\nd = 2\nn = 6\n[options]\ngrid = [0, 2]\n"),
    ("expo-test", "lambda = 1.0\ntrials = 200\n[topology]\nd = 2\nn = 0\n"),
])
def test_every_kind_runs_and_is_worker_invariant(tmp_path, kind, text):
    cfg = write(tmp_path, "c.json" if text.startswith("{") else "c.toml", text)
    outs = []
    for w in (1, 3):
        out = tmp_path / f"o{w}"
        assert cli.main([kind, "--config", str(cfg), "--out", str(out), "--workers", str(w)]) == 0
        outs.append((out / "trials.csv").read_bytes())
        assert cli.main(["plotdata", "--manifest", str(out / "manifest.json")]) == 0
    assert outs[0] == outs[1]


def test_console_script(tmp_path):
    cfg = write(tmp_path, "a.toml", EXT)
    r = subprocess.run([sys.executable, "-m", "treecp.cli", "extinction", "--config", str(cfg),
                        "--trials", "10", "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["out"] == str(tmp_path / "o")
