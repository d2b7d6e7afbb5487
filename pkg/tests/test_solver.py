#!/usr/bin/env python3
# test_solver.py
"""Aufbau filling, the SCF residual and the constrained minimization."""

import numpy, pytest

from dfcrystal.errors import InsufficientStates
from dfcrystal.model import ModelParams, gridBuild
from dfcrystal.operators import SpectralDecomp, BlochOperator, contextBuild, spectraCompute
from dfcrystal.constants import constantsEstimate
from dfcrystal.solver import aufbauFill, scfResidual, scfSolve, initialGuess, penalizationEpsilon, stepLength, freeReferenceEnergy


def decomp(values) -> SpectralDecomp:
    return SpectralDecomp(eigenvalues = numpy.asarray(values, dtype = float), eigenvectors = numpy.eye(len(values), dtype = complex))


######################
# Reference
######################

def test_free_reference_single_level():
    assert freeReferenceEnergy(ModelParams(ell = 2 * numpy.pi, z = 0.0, q = 2, alpha = 0.0, c = 1.0, k_cut = 1, n_xi = 1)) == pytest.approx(2.0)


def test_free_reference_second_shell():
    _params = ModelParams(ell = 2 * numpy.pi, z = 0.0, q = 4, alpha = 0.0, c = 1.0, k_cut = 1, n_xi = 1)

    assert freeReferenceEnergy(_params) == pytest.approx(2 + 2 * numpy.sqrt(2), rel = 1e-12)


######################
# Filling
######################

def test_aufbau_fills_lowest(freeParams):
    _grid = gridBuild(freeParams)
    _filling = aufbauFill([ decomp([-3, -2, 1, 2, 3]) ], 2, _grid, freeParams)

    assert numpy.array_equal(_filling.occupations[0], [0, 0, 1, 1, 0])
    assert _filling.nu == 2.0
    assert _filling.fractional_block == []
    assert _filling.total == pytest.approx(2.0)


def test_aufbau_shares_degenerate_level(freeParams):
    _grid = gridBuild(freeParams)
    _filling = aufbauFill([ decomp([-1, -1, 1, 1, 1, 1]) ], 2, _grid, freeParams)

    assert numpy.allclose(_filling.occupations[0], [0, 0, 0.5, 0.5, 0.5, 0.5])
    assert len(_filling.fractional_block) == 4
    assert _filling.total == pytest.approx(2.0)


def test_aufbau_needs_enough_states(freeParams):
    _grid = gridBuild(freeParams)

    with pytest.raises(InsufficientStates):
        aufbauFill([ decomp([-1, 1, 2]) ], 3, _grid, freeParams)

    _partial = aufbauFill([ decomp([-1, 1, 2]) ], 3, _grid, freeParams, allow_partial = True)

    assert _partial.exhausted
    assert _partial.total == pytest.approx(2.0)


def test_step_length():
    assert stepLength(1.0, 1.0, 1.0) == 0.0
    assert stepLength(-1.0, 0.0, 1.0) == 1.0
    assert stepLength(-1.0, 4.0, 1.0) == pytest.approx(0.25)
    assert stepLength(-1.0, 0.5, 1.0) == 1.0


######################
# SCF
######################

def test_free_solve_matches_reference(freeContext, freeConstants):
    _solution = scfSolve(freeContext, freeConstants)

    assert _solution.converged
    assert _solution.iterations == 1
    assert _solution.energies.total == pytest.approx(freeReferenceEnergy(freeContext.params), rel = 1e-12)
    assert _solution.residual == pytest.approx(0.0, abs = 1e-12)
    assert _solution.properties["trace_equals_q"]


def test_free_solve_with_open_shell():
    _context = contextBuild(ModelParams(ell = 2 * numpy.pi, z = 0.0, q = 4, alpha = 0.0, c = 1.0, k_cut = 1, n_xi = 1))
    _solution = scfSolve(_context, constantsEstimate(_context, probes = 2))

    assert _solution.energies.total == pytest.approx(2 + 2 * numpy.sqrt(2), rel = 1e-12)
    assert len(_solution.filling.fractional_block) == 12
    assert _solution.nu == pytest.approx(numpy.sqrt(2))


def test_penalization_window(freeContext, freeConstants):
    _eps_P, _c_star, _bound = penalizationEpsilon(freeContext, freeConstants)

    assert _eps_P == pytest.approx(_c_star + freeContext.params.eps_pen_margin)
    assert _c_star <= _bound


def test_residual_detects_wrong_state(linearContext):
    _gamma = initialGuess(linearContext, "free-fill")
    _nu = aufbauFill(spectraCompute(BlochOperator(linearContext.external)), 2, linearContext.grid, linearContext.params).nu

    assert scfResidual(_gamma, _nu, linearContext) < 1e-10
    assert scfResidual(_gamma, 1.0, linearContext) > 0.5


def test_linear_solve(linearContext, linearConstants):
    _solution = scfSolve(linearContext, linearConstants)

    assert _solution.converged
    assert _solution.gamma.trace() == pytest.approx(2.0)
    assert _solution.residual <= linearContext.params.scf_residual_tol


@pytest.mark.parametrize("initial", ["free-fill", "atomic-guess"])
def test_interacting_solve(interactingContext, interactingConstants, initial):
    _solution = scfSolve(interactingContext, interactingConstants, initial = initial)
    _penalized = [ _h["penalized_energy"] for _h in _solution.history ]

    assert _solution.converged
    assert _solution.properties["trace_equals_q"]
    assert _solution.properties["residual_below_tol"]
    assert all([ _b <= _a + 1e-10 * abs(_a) for _a, _b in zip(_penalized, _penalized[1:]) ])
    assert 0 < _solution.nu <= _solution.c_star


def test_checkpoint_start_reuses_state(freeContext, freeConstants):
    _first = scfSolve(freeContext, freeConstants)
    _second = scfSolve(freeContext, freeConstants, initial = "checkpoint", gamma = _first.gamma)

    assert _second.energies.total == pytest.approx(_first.energies.total)


def test_unknown_initial_guess(freeContext):
    with pytest.raises(ValueError):
        initialGuess(freeContext, "random")
