#!/usr/bin/env python3
# test_main.py
"""Configuration handling and the commands end to end."""

import json, pytest

import dfcrystal.main as main

from conftest import configWrite


FREE = {"ell": 6.283185307179586, "z": 0.0, "q": 2, "alpha": 0.0, "c": 1.0, "k_cut": 1, "n_xi": 1}
LIGHT = {"ell": 6.283185307179586, "z": 0.0, "q": 1, "alpha": 0.0, "c": 1.0, "k_cut": 0, "n_xi": 1}


######################
# Configuration
######################

def test_version_is_required():
    with pytest.raises(ValueError, match = "_version"):
        main.configurationValidate({"model": FREE}, "solve")


def test_unknown_version_is_rejected():
    with pytest.raises(ValueError, match = "_version"):
        main.configurationValidate({"_version": 2, "model": FREE}, "solve")


def test_unknown_keys_are_rejected():
    with pytest.raises(ValueError, match = "Unknown"):
        main.configurationValidate({"_version": 1, "model": FREE, "colour": 1}, "solve")

    with pytest.raises(ValueError, match = "t_list"):
        main.configurationValidate({"_version": 1, "model": FREE, "run": {"t_list": [0.1]}}, "solve")


def test_run_block_follows_command():
    _config = main.configurationValidate({"_version": 1, "model": FREE, "run": {"t_list": [0.1], "require_checkpoint": True}}, "expansion")

    assert _config.run["t_list"] == [0.1]
    assert _config.run["require_checkpoint"]
    assert _config.run["direction"] == "transfer"


def test_command_line_overrides_configuration(tmp_path):
    _config = main.configurationValidate({"_version": 1, "model": FREE, "mode": "strict", "seed": 1}, "solve", out = str(tmp_path), mode = "permissive", seed = 7)

    assert not _config.strict
    assert _config.seed == 7
    assert _config.directory == str(tmp_path)
    assert _config.effective["seed"] == 7


def test_constants_block_splits_overrides():
    _config = main.configurationValidate({"_version": 1, "model": FREE, "constants": {"C_G": 0.5, "probes": 3}}, "check")

    assert _config.constants == {"C_G": 0.5}
    assert _config.probes == 3


def test_unknown_command():
    with pytest.raises(ValueError, match = "Unknown command"):
        main.runParameters("relax")


def test_documentation_lists_blocks():
    _text = main.documentationGenerate()

    for _block in ["model", "constants", "output", "run (solve)", "run (expansion)", "run (scaling)"]:
        assert "### %s" % _block in _text


######################
# Commands
######################

def test_solve_writes_outputs(tmp_path):
    _code = main.execute("solve", configWrite(tmp_path, FREE), out = str(tmp_path / "out"))

    assert _code == 0

    for _name in ["solution.json", "gamma.ckpt.json", "shell_report.json", "scf_history.csv", "run.log"]:
        assert (tmp_path / "out" / _name).exists()

    _solution = json.loads((tmp_path / "out" / "solution.json").read_text())

    assert _solution["converged"]
    assert _solution["energies"]["total"] == pytest.approx(_solution["free_reference_energy"], rel = 1e-12)
    assert _solution["schema_version"] == 1


def test_solve_is_deterministic(tmp_path):
    _filename = configWrite(tmp_path, FREE)

    assert main.execute("solve", _filename, out = str(tmp_path / "a")) == 0
    assert main.execute("solve", _filename, out = str(tmp_path / "b")) == 0

    for _name in ["solution.json", "gamma.ckpt.json"]:
        assert (tmp_path / "a" / _name).read_bytes() == (tmp_path / "b" / _name).read_bytes()


def test_solve_with_sweep(tmp_path):
    _code = main.execute("solve", configWrite(tmp_path, FREE, run = {"eps_sweep": [0.05, 0.2]}), out = str(tmp_path))

    assert _code == 0
    assert (tmp_path / "eps_sweep.csv").read_text().splitlines()[0] == "margin,eps_P,energy,penalized_energy,trace,iterations"
    assert len((tmp_path / "eps_sweep.csv").read_text().splitlines()) == 3


def test_check_prints_report(tmp_path, capsys):
    _code = main.execute("check", configWrite(tmp_path, FREE), out = str(tmp_path))

    assert _code == 0

    _report = json.loads((tmp_path / "check_report.json").read_text())

    assert [ _c["name"] for _c in _report["assumptions"]["clauses"] ] == ["kappa", "rho_window", "speed_of_light", "critical_coupling"]
    assert "\"assumptions\"" in capsys.readouterr().out


def test_strict_mode_rejects_large_kappa(tmp_path):
    _model = dict(FREE, z = 1.0)
    _filename = configWrite(tmp_path, _model, constants = {"C_G": 100.0, "probes": 2}, mode = "strict")

    assert main.execute("solve", _filename, out = str(tmp_path)) == 3


def test_missing_configuration(tmp_path):
    assert main.execute("solve", str(tmp_path / "nothing.json")) == 10


def test_invalid_configuration(tmp_path):
    _filename = tmp_path / "config.json"
    _filename.write_text("{\"_version\": 1, \"model\": ")

    assert main.execute("solve", str(_filename)) == 12


def test_missing_checkpoint_is_reported(tmp_path):
    _filename = configWrite(tmp_path, FREE, run = {"require_checkpoint": True})

    assert main.execute("expansion", _filename, out = str(tmp_path)) == 11
    assert "CheckpointMissing" in (tmp_path / "run.log").read_text()


def test_small_radii_are_rejected(tmp_path):
    _filename = configWrite(tmp_path, LIGHT, run = {"lambda_list": [0.1, 0.2, 0.3, 0.4]})

    assert main.execute("scaling", _filename, out = str(tmp_path)) == 12


def test_diagnostic_solves_then_reuses_checkpoint(tmp_path):
    _filename = configWrite(tmp_path, LIGHT, run = {"samples": 20})

    assert main.execute("bands", _filename, out = str(tmp_path)) == 0
    assert (tmp_path / "gamma.ckpt.json").exists()
    assert (tmp_path / "bands_report.json").exists()
    assert (tmp_path / "bands.csv").exists()

    _first = (tmp_path / "bands_report.json").read_bytes()

    assert main.execute("bands", _filename, out = str(tmp_path)) == 0
    assert (tmp_path / "bands_report.json").read_bytes() == _first


def test_contraction_command(tmp_path):
    _filename = configWrite(tmp_path, FREE, run = {"start": "free-fill"})

    assert main.execute("contraction", _filename, out = str(tmp_path)) == 0

    _report = json.loads((tmp_path / "contraction_report.json").read_text())

    assert all(_report["properties"].values())


def test_exit_codes():
    from dfcrystal.errors import CheckpointMissing, CheckpointError, NoDescent, EmptyBall, AssumptionViolated

    assert main.exitCode(CheckpointMissing("x")) == 11
    assert main.exitCode(CheckpointError("x")) == 12
    assert main.exitCode(EmptyBall("x")) == 12
    assert main.exitCode(NoDescent("x")) == 2
    assert main.exitCode(AssumptionViolated("x")) == 3
    assert main.exitCode(FileNotFoundError("x")) == 10

    with pytest.raises(KeyError):
        main.exitCode(KeyError("x"))


def test_solve_interacting_model(tmp_path):
    _model = dict(FREE, z = 1.0, alpha = 0.05, c = 10.0)

    assert main.execute("solve", configWrite(tmp_path, _model), out = str(tmp_path)) == 0
    assert json.loads((tmp_path / "solution.json").read_text())["converged"]


######################
# Packaging
######################

def test_readme_requirements_match_setup():
    import os, re

    _root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

    with open(os.path.join(_root, "setup.py")) as f:
        _required = re.search(r"python_requires\s*=\s*['\"]>=\s*([0-9.]+)['\"]", f.read()).group(1)

    with open(os.path.join(_root, "README.md")) as f:
        _listed = re.findall(r"`Python>=([0-9.]+)`", f.read())

    assert _listed == [_required]
