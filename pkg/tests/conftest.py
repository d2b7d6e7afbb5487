#!/usr/bin/env python3
# conftest.py
"""Shared fixtures of the dfcrystal tests.

Sizes stay at k_cut <= 1 and n_xi <= 2 so that every test runs
in a few seconds.
"""
######################
# Imports & Globals
######################

import numpy, json, pytest

from dfcrystal.model import ModelParams
from dfcrystal.operators import contextBuild, threadsSet
from dfcrystal.constants import constantsEstimate
from dfcrystal.states import BlochDensityMatrix

import dfcrystal.log as log


TWO_PI = 2 * numpy.pi


######################
# Helpers
######################

def randomState(context, rank: int, seed: int = 0, occupation: float = 0.5) -> BlochDensityMatrix:
    """Density matrix with random orthonormal orbitals and equal occupations."""

    _rng = numpy.random.default_rng(seed)
    _n_b = context.basis.n_b

    _orbitals = []

    for _i in range(context.grid.size):
        _z = _rng.standard_normal((_n_b, rank)) + 1j * _rng.standard_normal((_n_b, rank))
        _q, _ = numpy.linalg.qr(_z)
        _orbitals.append(_q)

    return BlochDensityMatrix(_orbitals, [ numpy.full(rank, occupation) ] * context.grid.size, context.grid.ell)


def randomHermitian(context, seed: int = 1, scale: float = 1.0) -> numpy.ndarray:
    """Random Hermitian stack N x n_b x n_b."""

    _rng = numpy.random.default_rng(seed)
    _shape = (context.grid.size, context.basis.n_b, context.basis.n_b)

    _a = _rng.standard_normal(_shape) + 1j * _rng.standard_normal(_shape)

    return scale * 0.5 * (_a + numpy.conj(numpy.swapaxes(_a, 1, 2)))


def configWrite(path, model: dict, **blocks) -> str:
    """Writes a configuration file and returns its name."""

    _conf = {"_version": 1, "model": model, "constants": {"probes": 2}, "logging_verbosity": 1}
    _conf.update(blocks)

    _filename = str(path / "config.json")

    with open(_filename, "w") as f:
        json.dump(_conf, f)

    return _filename


######################
# Fixtures
######################

@pytest.fixture(autouse = True)
def quietLog():
    """Core logging to stdout at the default verbosity, one thread."""
    log.logfileSet()
    threadsSet(1)
    yield
    log.logfileSet()
    threadsSet(1)


@pytest.fixture
def freeParams() -> ModelParams:
    return ModelParams(ell = TWO_PI, z = 0.0, q = 2, alpha = 0.0, c = 1.0, k_cut = 1, n_xi = 1)


@pytest.fixture
def freeContext(freeParams):
    return contextBuild(freeParams)


@pytest.fixture
def linearParams() -> ModelParams:
    """Nucleus present, no interaction."""
    return ModelParams(ell = TWO_PI, z = 1.0, q = 2, alpha = 0.0, c = 10.0, k_cut = 1, n_xi = 1)


@pytest.fixture
def linearContext(linearParams):
    return contextBuild(linearParams)


@pytest.fixture
def interactingParams() -> ModelParams:
    return ModelParams(ell = TWO_PI, z = 1.0, q = 2, alpha = 0.05, c = 10.0, k_cut = 1, n_xi = 1)


@pytest.fixture
def interactingContext(interactingParams):
    return contextBuild(interactingParams)


@pytest.fixture
def smallContext():
    """k_cut = 0 on eight fibers, cheap interacting context."""
    return contextBuild(ModelParams(ell = TWO_PI, z = 0.5, q = 1, alpha = 0.1, c = 2.0, k_cut = 0, n_xi = 2))


@pytest.fixture
def freeConstants(freeContext):
    return constantsEstimate(freeContext, seed = 0, probes = 2)


@pytest.fixture
def linearConstants(linearContext):
    return constantsEstimate(linearContext, seed = 0, probes = 2)


@pytest.fixture
def interactingConstants(interactingContext):
    return constantsEstimate(interactingContext, seed = 0, probes = 4)
