#!/usr/bin/env python3
# test_states.py
"""Density matrices, energy functional and norms."""

import numpy, pytest

from dfcrystal.errors import InvalidState
from dfcrystal.states import (
    BlochDensityMatrix, tracePerCell, inGammaEq, inGammaLeq,
    energyCompute, energyOperatorForm, normsCompute, exchangeBilinear, directionalLinear,
)

from conftest import randomState, randomHermitian


######################
# Density matrices
######################

def test_occupations_outside_unit_interval_are_rejected():
    with pytest.raises(InvalidState):
        BlochDensityMatrix([ numpy.eye(4, 1, dtype = complex) ], [ numpy.asarray([1.5]) ])


def test_non_orthonormal_orbitals_are_rejected():
    _c = numpy.ones((4, 2), dtype = complex)

    with pytest.raises(InvalidState):
        BlochDensityMatrix([ _c ], [ numpy.asarray([0.5, 0.5]) ])


def test_dense_round_trip(smallContext):
    _gamma = randomState(smallContext, 2, seed = 7, occupation = 0.75)
    _again = BlochDensityMatrix.fromDense(_gamma.dense(), smallContext.grid.ell)

    assert numpy.allclose(_again.dense(), _gamma.dense(), atol = 1e-13)
    assert _again.ranks == [2] * smallContext.grid.size


def test_dense_with_bad_spectrum_is_rejected(smallContext):
    _stack = 2.0 * randomState(smallContext, 1, occupation = 1.0).dense()

    with pytest.raises(InvalidState):
        BlochDensityMatrix.fromDense(_stack)


def test_trace_per_cell(smallContext):
    _gamma = randomState(smallContext, 2, occupation = 0.5)

    assert tracePerCell(_gamma) == pytest.approx(1.0)
    assert tracePerCell(_gamma.dense()) == pytest.approx(1.0)
    assert inGammaEq(_gamma, 1, 1e-8)
    assert inGammaLeq(_gamma, 2, 1e-8)
    assert not inGammaEq(_gamma, 2, 1e-8)


def test_zero_state(smallContext):
    _zero = BlochDensityMatrix.zero(smallContext.grid.size, smallContext.basis.n_b)

    assert tracePerCell(_zero) == 0.0
    assert energyCompute(_zero, smallContext).total == 0.0


######################
# Energy
######################

@pytest.mark.parametrize("context_name", ["smallContext", "interactingContext"])
def test_kernel_and_operator_forms_agree(context_name, request):
    _ctx = request.getfixturevalue(context_name)
    _gamma = randomState(_ctx, 2, seed = 11)

    _kernel = energyCompute(_gamma, _ctx).total
    _operator = energyOperatorForm(_gamma, _ctx)

    assert _operator == pytest.approx(_kernel, rel = 1e-10)


def test_penalized_total(smallContext):
    _gamma = randomState(smallContext, 2, occupation = 0.25)
    _energy = energyCompute(_gamma, smallContext, eps_P = 3.0)

    assert _energy.penalized_total == pytest.approx(_energy.total - 3.0 * 0.5 + 3.0 * 1)
    assert set(_energy.dict().keys()) >= {"dirac_term", "hartree_term", "exchange_term", "total"}


def test_linear_variation_matches_finite_differences(smallContext):
    _gamma = randomState(smallContext, 2, seed = 12)
    _h = randomHermitian(smallContext, seed = 13, scale = 0.1)
    _t = 1e-3

    _plus = energyCompute(_gamma.dense() + _t * _h, smallContext).total
    _minus = energyCompute(_gamma.dense() - _t * _h, smallContext).total

    assert (_plus - _minus) / (2 * _t) == pytest.approx(directionalLinear(_gamma, _h, 0.0, smallContext), rel = 1e-7)


@pytest.mark.parametrize("seed", range(20))
def test_linear_variation_on_random_pairs(smallContext, seed):
    _gamma = randomState(smallContext, 1 + seed % 3, seed = 100 + seed, occupation = 0.3 + 0.02 * seed)
    _h = randomHermitian(smallContext, seed = 200 + seed)
    _t = 1e-5

    _plus = energyCompute(_gamma.dense() + _t * _h, smallContext).total
    _minus = energyCompute(_gamma.dense() - _t * _h, smallContext).total

    assert (_plus - _minus) / (2 * _t) == pytest.approx(directionalLinear(_gamma, _h, 0.0, smallContext), rel = 1e-6, abs = 1e-9)


def test_energy_is_quadratic_along_lines(smallContext):
    _gamma = randomState(smallContext, 2, seed = 14)
    _h = randomHermitian(smallContext, seed = 15, scale = 0.1)
    _t = 1e-2

    _base = energyCompute(_gamma, smallContext).total
    _plus = energyCompute(_gamma.dense() + _t * _h, smallContext).total
    _minus = energyCompute(_gamma.dense() - _t * _h, smallContext).total

    _second = (_plus + _minus - 2 * _base) / _t ** 2

    assert _second == pytest.approx(smallContext.params.alpha * exchangeBilinear(_h, _h, smallContext), rel = 1e-5)


def test_penalization_shifts_linear_variation(smallContext):
    _gamma = randomState(smallContext, 2, seed = 16)
    _h = randomHermitian(smallContext, seed = 17)

    _shift = directionalLinear(_gamma, _h, 0.0, smallContext) - directionalLinear(_gamma, _h, 2.0, smallContext)

    assert _shift == pytest.approx(2.0 * tracePerCell(_h))


######################
# Norms
######################

def test_norms_of_zero(smallContext):
    _norms = normsCompute(numpy.zeros((smallContext.grid.size, smallContext.basis.n_b, smallContext.basis.n_b)), smallContext)

    assert _norms.combined == 0.0
    assert _norms.combined_c == 0.0


def test_norms_scale_linearly(smallContext):
    _h = randomHermitian(smallContext, seed = 21)

    _one = normsCompute(_h, smallContext)
    _two = normsCompute(2 * _h, smallContext)

    assert _two.norm_X == pytest.approx(2 * _one.norm_X)
    assert _two.norm_Y_conv == pytest.approx(2 * _one.norm_Y_conv)
    assert _one.norm_Yc == pytest.approx(smallContext.params.c * _one.norm_Y)
    assert _one.combined == max(_one.norm_X, _one.norm_Y)
