import csv
import filecmp
import json
import os

import pytest

from ampgate.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_PARTIAL, config_hash, main
from ampgate.scenarios import load_config

SPEEDUP = """
[scenario]
name = "tiny_speedup"
kind = "speedup_vs_g"
seed = 11

[noise]
gamma_hz = 5.2
sigma_delta_hz = 100

[ensemble]
n_runs = 8
n_bootstrap = 20
optimize_detuning = false
steps_per_loop = 400
chunk_size = 2

[analysis]
n_bootstrap = 300

[sweep]
g_khz = [0.0, 12.4]
"""

SINGLE = """
[scenario]
name = "single"
kind = "single_gate"

[sweep]
g_khz = [0.0, 12.4, 49.7]
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(cfg, out, *extra):
    return main(["run", cfg, "--out", str(out), "--quiet", *extra])


def test_single_gate_reports_unit_fidelity(tmp_path):
    assert run(write(tmp_path, SINGLE), tmp_path / "o") == EXIT_OK
    rows = read_csv(tmp_path / "o" / "single_gate.csv")
    assert [float(r["g_khz"]) for r in rows] == [0.0, 12.4, 49.7]
    for r in rows:
        assert abs(float(r["fidelity"]) - 1) < 1e-6
    assert abs(float(rows[2]["gain"]) - 3.25) < 0.01
    assert abs(float(rows[0]["tau_us"]) - 342.5) < 0.35


def test_partial_failure_exit_code(tmp_path):
    cfg = write(tmp_path, SINGLE.replace("[0.0, 12.4, 49.7]", "[0.0, 1e7]"))
    assert run(cfg, tmp_path / "o") == EXIT_PARTIAL
    rows = read_csv(tmp_path / "o" / "single_gate.csv")
    assert len(rows) == 1
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert len(manifest["failures"]) == 1
    cfg = write(tmp_path, SINGLE.replace("[0.0, 12.4, 49.7]", "[1e7]"), "all_bad.toml")
    assert run(cfg, tmp_path / "o2") == EXIT_NUMERICAL


@pytest.mark.parametrize("text,where", [
    (SINGLE.replace("[sweep]", "[params]\nbogus = 1\n\n[sweep]"), "line 7"),
    (SINGLE.replace('kind = "single_gate"', 'kind = "warp"'), "line 4"),
    (SINGLE + "\n[noise]\ngamma_hz = -2\n", "line 10"),
])
def test_config_errors_name_the_line(tmp_path, capsys, text, where):
    assert run(write(tmp_path, text), tmp_path / "o") == EXIT_CONFIG
    assert where in capsys.readouterr().err


def test_other_config_errors(tmp_path, capsys):
    assert run(str(tmp_path / "missing.toml"), tmp_path / "o") == EXIT_CONFIG
    assert main(["run"]) == EXIT_CONFIG
    assert main(["run", write(tmp_path, SINGLE), "--jobs", "0"]) == EXIT_CONFIG
    assert main(["run", write(tmp_path, "[scenario\n")]) == EXIT_CONFIG
    capsys.readouterr()


def test_solve_command(capsys):
    assert main(["solve", "--g-khz", "49.7"]) == EXIT_OK
    out = dict(line.split("=") for line in capsys.readouterr().out.split())
    assert abs(float(out["gain"]) - 3.25) < 0.01
    assert main(["solve", "--g-khz", "-3"]) == EXIT_CONFIG


def test_cli_determinism_and_manifest_replay(tmp_path):
    cfg = write(tmp_path, SPEEDUP)
    a, b, c, d = (tmp_path / x for x in "abcd")
    assert run(cfg, a) == EXIT_OK
    assert run(cfg, b, "--jobs", "2") == EXIT_OK
    files = sorted(os.listdir(a))
    assert "speedup.csv" in files and "manifest.json" in files
    data = [f for f in files if f != "manifest.json"]
    _, mismatch, errors = filecmp.cmpfiles(a, b, data, shallow=False)
    assert mismatch == [] and errors == []
    ma, mb = (json.loads((x / "manifest.json").read_text()) for x in (a, b))
    ma["config"]["scenario"].pop("output_dir")
    mb["config"]["scenario"].pop("output_dir")
    ma.pop("config_hash")
    mb.pop("config_hash")
    assert ma == mb

    # the manifest's effective config reproduces the run
    assert run(str(a / "manifest.json"), c) == EXIT_OK
    _, mismatch, _ = filecmp.cmpfiles(a, c, data, shallow=False)
    assert mismatch == []
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["master_seed"] == 11
    assert len(manifest["sub_seeds"]) == 2
    assert manifest["config_hash"] == config_hash(manifest["config"])
    assert load_config(str(a / "manifest.json")) == manifest["config"]

    # a different seed gives different data
    assert run(cfg, d, "--seed", "12") == EXIT_OK
    assert (a / "grid_g0.csv").read_bytes() != (d / "grid_g0.csv").read_bytes()
