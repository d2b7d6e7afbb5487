#!/usr/bin/env python3
# test_model.py
"""Grid, basis and regularized weights."""

import numpy, pytest, itertools

from dfcrystal.model import ModelParams, gridBuild, basisBuild, weightsBuild, voxelAverage, offgridWeights, chordAverage


def params(**kwargs) -> ModelParams:
    _values = {"ell": numpy.pi, "z": 0.0, "q": 1, "alpha": 0.0, "c": 1.0, "k_cut": 0, "n_xi": 1}
    _values.update(kwargs)
    return ModelParams(**_values)


######################
# Parameters
######################

def test_defaults_scale_with_c():
    _p = params(c = 10.0)

    assert _p.eps_pen_margin == pytest.approx(10.0)
    assert _p.retraction_tol == pytest.approx(1e-8)
    assert _p.n_b == 4


def test_missing_parameter_is_rejected():
    with pytest.raises(ValueError, match = "ell"):
        ModelParams.fromDict({"q": 1, "alpha": 0.0, "c": 1.0})


def test_out_of_range_and_unknown_parameters_are_rejected():
    with pytest.raises(ValueError, match = "alpha"):
        params(alpha = 1.5)

    with pytest.raises(ValueError, match = "c"):
        params(c = 0.5)

    with pytest.raises(ValueError, match = "Unknown"):
        ModelParams.fromDict({"ell": 1.0, "q": 1, "alpha": 0.0, "c": 1.0, "spin": 2})


def test_odd_subsample_is_rejected():
    with pytest.raises(ValueError, match = "even"):
        params(subsample = 63)


######################
# Grid
######################

def test_single_point_grid():
    _grid = gridBuild(params(n_xi = 1))

    assert _grid.size == 1
    assert numpy.allclose(_grid.points[0], 0.0)
    assert _grid.weight == 1.0


def test_two_point_grid_midpoints():
    _grid = gridBuild(params(n_xi = 2))

    assert _grid.size == 8
    assert numpy.allclose(numpy.abs(_grid.points), 0.5)
    assert numpy.sum(_grid.weights) == pytest.approx(1.0)


@pytest.mark.parametrize("n_xi", [1, 2, 3, 4])
def test_grid_in_cell_and_spacing(n_xi):
    _p = params(n_xi = n_xi, ell = 2.0)
    _grid = gridBuild(_p)

    assert _grid.spacing == pytest.approx(2 * numpy.pi / (2.0 * n_xi))
    assert numpy.all(_grid.points >= -numpy.pi / 2.0)
    assert numpy.all(_grid.points < numpy.pi / 2.0)

    if n_xi > 1:
        _d = numpy.linalg.norm(_grid.points[:, None, :] - _grid.points[None, :, :], axis = 2)
        _d[numpy.diag_indices(_grid.size)] = numpy.inf

        assert numpy.max(numpy.min(_d, axis = 1)) == pytest.approx(_grid.spacing)


def test_grid_closed_under_negation():
    _grid = gridBuild(params(n_xi = 3))

    assert numpy.allclose(_grid.points[_grid.negatedIndex()], -_grid.points)


######################
# Basis
######################

@pytest.mark.parametrize("k_cut, n_b", [(0, 4), (1, 108), (2, 500)])
def test_basis_dimension(k_cut, n_b):
    assert basisBuild(params(k_cut = k_cut)).n_b == n_b


def test_basis_index_map_round_trip():
    _basis = basisBuild(params(k_cut = 1))

    assert [ _basis.flatten(*_basis.unflatten(_i)) for _i in range(_basis.n_b) ] == list(range(_basis.n_b))

    for _m, _k in enumerate(_basis.modes):
        assert _basis.modeIndex(_k) == _m


def test_basis_modes_lexicographic():
    _basis = basisBuild(params(k_cut = 1))

    assert [ tuple(_k) for _k in _basis.modes ] == sorted(itertools.product(range(-1, 2), repeat = 3))


######################
# Weights
######################

def test_pointwise_weight():
    _p = params(ell = 2 * numpy.pi, n_xi = 2, k_cut = 1)
    _basis = basisBuild(_p)
    _weights = weightsBuild(gridBuild(_p), _basis, 8)

    assert _weights.table[_basis.shiftIndex([1, 0, 0]), 0, 0] == pytest.approx(1.0, rel = 1e-14)


def test_singular_entry_converges():
    _spacing = 0.5
    _coarse = voxelAverage(_spacing, 64)
    _fine = voxelAverage(_spacing, 128)

    assert abs(_coarse - _fine) / _fine <= 0.01


def test_singular_entry_matches_ray_quadrature():
    _spacing = 0.5

    assert voxelAverage(_spacing, 128) == pytest.approx(float(chordAverage(numpy.zeros(3), _spacing)[0]), rel = 0.02)


def test_weights_finite_positive_symmetric():
    _p = params(ell = 2 * numpy.pi, n_xi = 2, k_cut = 1)
    _weights = weightsBuild(gridBuild(_p), basisBuild(_p), 16)

    assert numpy.all(numpy.isfinite(_weights.table))
    assert numpy.all(_weights.table > 0)
    assert numpy.array_equal(_weights.table, numpy.swapaxes(_weights.table[::-1], 1, 2))


def test_odd_voxel_resolution_rejected():
    with pytest.raises(ValueError):
        voxelAverage(1.0, 7)


def test_offgrid_weights_match_table_on_grid():
    _p = params(ell = 2 * numpy.pi, n_xi = 2, k_cut = 1)
    _grid = gridBuild(_p)
    _basis = basisBuild(_p)
    _weights = weightsBuild(_grid, _basis, 64)

    _j = 3
    _offgrid = offgridWeights(_grid, _basis, _grid.points[_j])

    _singular = numpy.zeros(_offgrid.shape, dtype = bool)
    _singular[_basis.zero_shift, _j] = True

    assert numpy.allclose(_offgrid[~_singular], _weights.table[:, :, _j][~_singular], rtol = 1e-12)
    assert _offgrid[_singular][0] == pytest.approx(_weights.singular_value, rel = 0.02)
