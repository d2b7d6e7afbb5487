#!/usr/bin/env python3
# checkpoint.py
"""Persistence of density matrices and reports.

Everything is written as canonical JSON (sorted keys, fixed
indentation, shortest round-trip float representation), so that
identical runs produce identical bytes. Non-finite floats are
stored as the strings "inf", "-inf" and "nan".
"""
######################
# Imports & Globals
######################

import numpy, json, hashlib, csv

# Typing
from typing import Dict, List, Sequence

from dfcrystal.errors import CheckpointError
from dfcrystal.model import ModelParams, BrillouinGrid
from dfcrystal.states import BlochDensityMatrix


SCHEMA_VERSION = 1


######################
# Canonical JSON
######################

def plain(value: any) -> any:
    """Converts numpy values and non-finite floats into JSON values."""

    if isinstance(value, dict):
        return { str(_k): plain(_v) for _k, _v in value.items() }

    if isinstance(value, (list, tuple)):
        return [ plain(_v) for _v in value ]

    if isinstance(value, numpy.ndarray):
        return plain(value.tolist())

    if isinstance(value, (bool, numpy.bool_)):
        return bool(value)

    if isinstance(value, (int, numpy.integer)):
        return int(value)

    if isinstance(value, (float, numpy.floating)):
        _v = float(value)

        if numpy.isnan(_v):
            return "nan"

        if numpy.isinf(_v):
            return "inf" if _v > 0 else "-inf"

        return _v

    return value


def canonicalJson(value: any) -> str:
    return json.dumps(plain(value), sort_keys = True, indent = 1, ensure_ascii = False, allow_nan = False) + "\n"


def paramsHash(params: ModelParams) -> str:
    """SHA-256 of the compact canonical model block."""
    _text = json.dumps(plain(params.dict()), sort_keys = True, separators = (",", ":"), allow_nan = False)
    return hashlib.sha256(_text.encode("utf-8")).hexdigest()


######################
# Density matrix
######################

def gammaDict(gamma: BlochDensityMatrix, params: ModelParams, grid: BrillouinGrid) -> Dict[str, any]:
    """Checkpoint content; orbitals are stored row-major as interleaved re/im."""

    _fibers = []

    for _c, _f in zip(gamma.orbitals, gamma.occupations):
        _interleaved = numpy.stack([numpy.real(_c).ravel(), numpy.imag(_c).ravel()], axis = 1).ravel()

        _fibers.append({
            "n_b": int(_c.shape[0]),
            "r": int(_c.shape[1]),
            "occupations": _f.tolist(),
            "orbitals": _interleaved.tolist(),
        })

    return {
        "schema_version": SCHEMA_VERSION,
        "params_hash": paramsHash(params),
        "model": params.dict(),
        "grid": grid.descriptor(),
        "fibers": _fibers,
    }


def gammaSave(filename: str, gamma: BlochDensityMatrix, params: ModelParams, grid: BrillouinGrid) -> None:
    """Writes the checkpoint of 'gamma' to 'filename'."""

    with open(filename, "w") as f:
        f.write(canonicalJson(gammaDict(gamma, params, grid)))


def gammaFromDict(data: Dict[str, any], params: ModelParams = None) -> BlochDensityMatrix:
    """Rebuilds the density matrix of a checkpoint.

    Raises:
    CheckpointError -- on an unknown schema, a different model or a malformed fiber
    """

    if data.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointError("Unsupported checkpoint schema version %s." % data.get("schema_version"))

    if params is not None and data.get("params_hash") != paramsHash(params):
        raise CheckpointError("Checkpoint belongs to a different model (hash %s)." % data.get("params_hash"))

    _orbitals = []
    _occupations = []

    try:
        for _i, _fiber in enumerate(data["fibers"]):
            _n_b, _r = int(_fiber["n_b"]), int(_fiber["r"])
            _values = numpy.asarray(_fiber["orbitals"], dtype = float)

            if _values.shape[0] != 2 * _n_b * _r or len(_fiber["occupations"]) != _r:
                raise CheckpointError("Fiber %d has inconsistent sizes." % _i)

            _orbitals.append((_values[0::2] + 1j * _values[1::2]).reshape((_n_b, _r)))
            _occupations.append(numpy.asarray(_fiber["occupations"], dtype = float))

        _ell = float(data["grid"]["ell"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError("Malformed checkpoint: %s" % str(e))

    if len(_orbitals) == 0:
        raise CheckpointError("Checkpoint holds no fibers.")

    return BlochDensityMatrix(_orbitals, _occupations, _ell)


def gammaLoad(filename: str, params: ModelParams = None) -> BlochDensityMatrix:
    """Reads a checkpoint written by 'gammaSave'.

    Raises:
    FileNotFoundError -- when the file does not exist
    CheckpointError -- on invalid content
    """

    with open(filename, "r") as f:
        try:
            _data = json.load(f)
        except json.JSONDecodeError as e:
            raise CheckpointError("Checkpoint '%s' is not valid JSON: %s" % (filename, str(e)))

    return gammaFromDict(_data, params)


######################
# Reports
######################

def reportSave(filename: str, report: Dict[str, any]) -> str:
    """Writes a report with its schema version, returns the written text."""

    _text = canonicalJson({**report, "schema_version": SCHEMA_VERSION})

    with open(filename, "w") as f:
        f.write(_text)

    return _text


def csvSave(filename: str, header: Sequence[str], rows: List[Sequence[any]]) -> None:
    """Writes rows under a header; None is written as an empty field."""

    with open(filename, "w", newline = "") as f:
        _writer = csv.writer(f, lineterminator = "\n")
        _writer.writerow(header)

        for _row in rows:
            _writer.writerow([ "" if _v is None else (repr(float(_v)) if isinstance(_v, (float, numpy.floating)) else _v) for _v in _row ])
