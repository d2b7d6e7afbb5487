#!/usr/bin/env python3
# test_operators.py
"""Fiber operators, exchange assembly and spectra."""

import numpy, pytest

from dfcrystal.errors import ZeroModeAmbiguity
from dfcrystal.model import ModelParams
from dfcrystal.operators import (
    threadsSet, fiberMap, diracFiber, coulombSymbol, densityFourier,
    exchangeMatrix, exchangeMatrices, exchangeMatrixNaive, exchangeAt,
    contextBuild, meanField, spectraCompute, spectralDecomp, positiveProjector,
    spectralGapCheck, BlochOperator, coulombMatrix, meanFieldAt, denseStack,
)

from conftest import randomState


def test_threads_must_be_positive():
    with pytest.raises(ValueError):
        threadsSet(0)


def test_fiber_map_keeps_order():
    threadsSet(3)

    assert fiberMap(lambda i: i * i, range(20)) == [ i * i for i in range(20) ]


def test_dirac_spectrum_at_zero():
    _params = ModelParams(ell = 1.0, z = 0.0, q = 1, alpha = 0.0, c = 3.0, k_cut = 0, n_xi = 1)
    _ctx = contextBuild(_params)

    assert numpy.allclose(numpy.linalg.eigvalsh(_ctx.free[0]), [-9.0, -9.0, 9.0, 9.0])


def test_dirac_spectrum_matches_dispersion(freeContext):
    _params = freeContext.params
    _basis = freeContext.basis
    _xi = numpy.asarray([0.1, -0.2, 0.3])

    _matrix = diracFiber(_xi, _basis, _params)
    _p2 = numpy.sum(_basis.momenta(_xi) ** 2, axis = 1)
    _energy = numpy.sqrt(_params.c ** 4 + _params.c ** 2 * _p2)

    _expected = numpy.sort(numpy.concatenate([ -_energy, -_energy, _energy, _energy ]))

    assert numpy.allclose(numpy.linalg.eigvalsh(_matrix), _expected)
    assert numpy.allclose(_matrix, _matrix.conj().T)


def test_coulomb_symbol_vanishes_at_zero(freeContext):
    _g = coulombSymbol(freeContext.basis)

    assert _g[freeContext.basis.zero_shift] == 0.0
    assert numpy.all(_g[numpy.arange(_g.shape[0]) != freeContext.basis.zero_shift] > 0)


def test_density_average_is_trace_per_volume(smallContext):
    _gamma = randomState(smallContext, 2, seed = 5)
    _rho = densityFourier(_gamma, smallContext.basis)

    assert _rho.value([0, 0, 0]).real == pytest.approx(1.0 / smallContext.grid.ell ** 3)
    assert _rho.value([9, 9, 9]) == 0j


def test_exchange_matches_naive_loops(interactingContext):
    _gamma = randomState(interactingContext, 3, seed = 2)

    assert numpy.allclose(exchangeMatrix(_gamma, 0, interactingContext), exchangeMatrixNaive(_gamma, 0, interactingContext), atol = 1e-12)


def test_exchange_matches_naive_loops_on_fibers(smallContext):
    _gamma = randomState(smallContext, 2, seed = 3)
    _all = exchangeMatrices(_gamma, smallContext)

    for _i in [0, 3, 7]:
        assert numpy.allclose(_all[_i], exchangeMatrixNaive(_gamma, _i, smallContext), atol = 1e-12)


def test_exchange_threads_agree(smallContext):
    _gamma = randomState(smallContext, 2, seed = 4)
    _serial = exchangeMatrices(_gamma, smallContext)

    threadsSet(4)
    _parallel = exchangeMatrices(_gamma, smallContext)

    assert numpy.array_equal(_serial, _parallel)


def test_exchange_at_grid_point_is_close_to_table(smallContext):
    _gamma = randomState(smallContext, 2, seed = 6)

    _on = exchangeMatrix(_gamma, 5, smallContext)
    _off = exchangeAt(_gamma, smallContext.grid.points[5], smallContext)

    assert numpy.allclose(_on, _off, rtol = 0.02, atol = 0.02 * numpy.max(numpy.abs(_on)))


def test_mean_field_is_hermitian(interactingContext):
    _gamma = randomState(interactingContext, 2, seed = 1)
    _operator = meanField(_gamma, interactingContext)

    assert numpy.allclose(_operator.matrices, numpy.conj(numpy.swapaxes(_operator.matrices, 1, 2)))


def test_mean_field_without_interaction_is_external(linearContext):
    _gamma = randomState(linearContext, 2, seed = 1)

    assert numpy.array_equal(meanField(_gamma, linearContext).matrices, linearContext.external)


def test_projector_is_idempotent(linearContext):
    _spectra = spectraCompute(BlochOperator(linearContext.external))
    _projector = positiveProjector(_spectra[0], linearContext.params)

    assert numpy.allclose(_projector @ _projector, _projector, atol = 1e-12)
    assert numpy.trace(_projector).real == pytest.approx(linearContext.basis.n_b / 2)


def test_zero_mode_is_ambiguous(freeParams):
    _decomp = spectralDecomp(numpy.diag([-1.0, 0.0, 1.0]).astype(complex))

    with pytest.raises(ZeroModeAmbiguity):
        positiveProjector(_decomp, freeParams)


def test_eigenvector_phase_is_fixed():
    _matrix = numpy.asarray([[2.0, 1j], [-1j, 2.0]])
    _decomp = spectralDecomp(_matrix)

    for _v in _decomp.eigenvectors.T:
        _pivot = _v[numpy.argmax(numpy.abs(_v))]
        assert _pivot.imag == pytest.approx(0.0) and _pivot.real > 0

    assert numpy.allclose(_decomp.reconstruct(), _matrix)


def test_free_gap(freeContext):
    _spectra = spectraCompute(BlochOperator(freeContext.free))
    _gap, _bound = spectralGapCheck(_spectra, 1.0, freeContext.params)

    assert _gap == pytest.approx(freeContext.params.c ** 2)
    assert _gap >= _bound


def test_coulomb_matrix_is_symmetric_without_diagonal(freeContext):
    _G = coulombMatrix(freeContext.basis)

    assert numpy.allclose(_G, _G.T)
    assert numpy.all(numpy.diag(_G) == 0)


def test_mean_field_at_grid_point_matches_fiber(linearContext):
    _gamma = randomState(linearContext, 2, seed = 3)
    _j = linearContext.grid.size - 1

    assert numpy.allclose(meanFieldAt(linearContext.grid.points[_j], _gamma, linearContext), meanField(_gamma, linearContext).matrices[_j])


######################
# Real-space exchange
######################

def midpointVoxelAverage(spacing: float, subsample: int) -> float:
    """Average of 1/|eta|^2 over the full voxel, midpoint rule."""

    _t = ((numpy.arange(subsample) + 0.5) / subsample - 0.5) * spacing
    _r2 = _t[:, None, None] ** 2 + _t[None, :, None] ** 2 + _t[None, None, :] ** 2

    return float(numpy.mean(1.0 / _r2))


def realSpaceExchange(gamma, fiber: int, context, points: int = 24, reach: int = 6) -> numpy.ndarray:
    """Exchange matrix by quadrature of the periodic kernel in x and y.

    The kernel K(r) = (4 pi/ell^3) sum_k e^{2 pi i k.r/ell} / |2 pi k/ell - (xi' - xi)|^2
    is summed over |k|_inf <= 'reach' on a 'points'^3 grid of the cell,
    the y-integral is a circular convolution on that grid.
    """

    _grid = context.grid
    _basis = context.basis
    _ell = _grid.ell
    _s = _basis.spinor_dim
    _stack = denseStack(gamma)

    _dv = (_ell / points) ** 3
    _j = numpy.arange(points)

    # Plane waves e_m(x) on the grid, n_modes x points^3
    _phase = numpy.exp(2j * numpy.pi * numpy.outer(numpy.arange(-_basis.k_cut, _basis.k_cut + 1), _j) / points)
    _o = _basis.k_cut
    _waves = numpy.asarray([
        numpy.einsum("i,j,k->ijk", _phase[_m[0] + _o], _phase[_m[1] + _o], _phase[_m[2] + _o]).ravel()
        for _m in _basis.modes
    ]) / _ell ** 1.5

    _k = numpy.arange(-reach, reach + 1)
    _kphase = numpy.exp(2j * numpy.pi * numpy.outer(_k, _j) / points)
    _kk = numpy.stack(numpy.meshgrid(_k, _k, _k, indexing = "ij"), axis = -1)

    _out = numpy.zeros((_basis.n_b, _basis.n_b), dtype = complex)

    for _source in range(_grid.size):
        _eta = _grid.points[_source] - _grid.points[fiber]
        _den = numpy.sum((2 * numpy.pi * _kk / _ell - _eta) ** 2, axis = -1)

        if _source == fiber:
            _den[reach, reach, reach] = 1.0 / midpointVoxelAverage(_grid.spacing, context.weights.subsample)

        _kernel = (4 * numpy.pi / _ell ** 3) * numpy.einsum("abc,ai,bj,ck->ijk", 1.0 / _den, _kphase, _kphase, _kphase)
        _kernel_hat = numpy.fft.fftn(_kernel)

        _values, _vectors = numpy.linalg.eigh(_stack[_source])

        for _lam, _v in zip(_values, _vectors.T):
            if abs(_lam) < 1e-12:
                continue

            # Spinor components of the orbital, spinor x points^3
            _phi = numpy.asarray([ _v[_c::_s] @ _waves for _c in range(_s) ])

            # Left factor e_n(x)^* phi_s(x), flat index 4 n + s
            _left = (numpy.conj(_waves)[:, None, :] * _phi[None, :, :]).reshape((_basis.n_b, -1))

            # Right factor (K * (phi_s'^* e_n'))(x), flat index 4 n' + s'
            _g = (numpy.conj(_phi)[None, :, :] * _waves[:, None, :]).reshape((_basis.n_b, points, points, points))
            _conv = _dv * numpy.fft.ifftn(_kernel_hat[None] * numpy.fft.fftn(_g, axes = (1, 2, 3)), axes = (1, 2, 3))

            _out += _lam * _dv * (_left @ _conv.reshape((_basis.n_b, -1)).T)

    return _out / _grid.size


@pytest.mark.parametrize("k_cut, n_xi", [(0, 1), (0, 2), (1, 1), (1, 2)])
def test_exchange_matches_real_space_quadrature(k_cut, n_xi):
    _ctx = contextBuild(ModelParams(ell = 3.0, z = 0.5, q = 1, alpha = 0.1, c = 2.0, k_cut = k_cut, n_xi = n_xi))
    _gamma = randomState(_ctx, 2, seed = 11)

    for _fiber in sorted({0, _ctx.grid.size - 1}):
        _expected = realSpaceExchange(_gamma, _fiber, _ctx)

        assert numpy.max(numpy.abs(exchangeMatrix(_gamma, _fiber, _ctx) - _expected)) <= 0.01 * numpy.max(numpy.abs(_expected))


def test_singular_weight_matches_full_voxel_average(smallContext):
    _weights = smallContext.weights

    assert _weights.singular_value == pytest.approx(midpointVoxelAverage(_weights.spacing, _weights.subsample), rel = 1e-10)
