#!/usr/bin/env python3
# test_checkpoint.py
"""Checkpoint files and canonical reports."""

import numpy, json, pytest

from dfcrystal.errors import CheckpointError
from dfcrystal.checkpoint import gammaSave, gammaLoad, canonicalJson, paramsHash, reportSave, csvSave

from conftest import randomState


def test_checkpoint_is_exact(smallContext, tmp_path):
    _gamma = randomState(smallContext, 2, seed = 9, occupation = 0.3)
    _filename = str(tmp_path / "gamma.ckpt.json")

    gammaSave(_filename, _gamma, smallContext.params, smallContext.grid)
    _loaded = gammaLoad(_filename, smallContext.params)

    for _a, _b in zip(_gamma.orbitals, _loaded.orbitals):
        assert numpy.array_equal(_a, _b)

    for _a, _b in zip(_gamma.occupations, _loaded.occupations):
        assert numpy.array_equal(_a, _b)

    assert _loaded.ell == smallContext.grid.ell


def test_checkpoint_of_other_model_is_rejected(smallContext, tmp_path):
    _filename = str(tmp_path / "gamma.ckpt.json")
    gammaSave(_filename, randomState(smallContext, 1), smallContext.params, smallContext.grid)

    with pytest.raises(CheckpointError, match = "different model"):
        gammaLoad(_filename, smallContext.params.replace(c = 3.0))


def test_corrupt_checkpoint_is_rejected(tmp_path):
    _filename = tmp_path / "gamma.ckpt.json"
    _filename.write_text("{\"schema_version\": 1, \"fibers\": [")

    with pytest.raises(CheckpointError):
        gammaLoad(str(_filename))

    _filename.write_text(json.dumps({"schema_version": 1, "grid": {"ell": 1.0}, "fibers": [{"n_b": 4, "r": 1, "occupations": [1.0], "orbitals": [1.0]}]}))

    with pytest.raises(CheckpointError, match = "inconsistent"):
        gammaLoad(str(_filename))


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError):
        gammaLoad(str(tmp_path / "nothing.json"))


def test_params_hash_is_stable(smallContext):
    assert paramsHash(smallContext.params) == paramsHash(smallContext.params.replace())
    assert paramsHash(smallContext.params) != paramsHash(smallContext.params.replace(q = 2))


def test_canonical_json():
    _text = canonicalJson({"b": numpy.float64(1.5), "a": [numpy.int64(2), float("inf"), numpy.bool_(True)]})

    assert json.loads(_text) == {"a": [2, "inf", True], "b": 1.5}
    assert _text.index("\"a\"") < _text.index("\"b\"")


def test_report_carries_schema_version(tmp_path):
    _filename = str(tmp_path / "report.json")
    _text = reportSave(_filename, {"value": 1.0})

    assert json.loads(_text)["schema_version"] == 1
    assert open(_filename).read() == _text


def test_csv_writes_empty_fields(tmp_path):
    _filename = str(tmp_path / "rows.csv")
    csvSave(_filename, ["a", "b"], [[1, None], [0.25, "x"]])

    assert open(_filename).read() == "a,b\n1,\n0.25,x\n"
