#!/usr/bin/env python3
# operators.py
"""Fiber operators of the periodic Dirac-Fock model.

Every operator is a dense Hermitian n_b x n_b matrix per grid
fiber. Families over the whole grid are stored as N x n_b x n_b
arrays ('BlochOperator'). Density matrices may be passed either
as 'states.BlochDensityMatrix' (anything with 'dense()') or as
a dense N x n_b x n_b stack.
"""
######################
# Imports & Globals
######################

import numpy

# Dense Hermitian eigensolver
import scipy.linalg

# Parallel computing over fibers
from concurrent import futures

from dataclasses import dataclass

# Typing
from typing import Callable, Iterable, List, Tuple

from dfcrystal.model import ModelParams, BrillouinGrid, PlaneWaveBasis, RegularizedWeights
from dfcrystal.model import gridBuild, basisBuild, weightsBuild, offgridWeights
from dfcrystal.errors import ZeroModeAmbiguity, EigensolverError

import dfcrystal.log as log


# Number of worker threads for fiber maps
THREADS = 1


# Pauli matrices
SIGMA = numpy.asarray([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype = complex)

# Dirac matrices in the standard representation
ALPHA = numpy.zeros((3, 4, 4), dtype = complex)
for _j in range(3):
    ALPHA[_j, :2, 2:] = SIGMA[_j]
    ALPHA[_j, 2:, :2] = SIGMA[_j]

BETA = numpy.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)


######################
# Concurrency
######################

def threadsSet(threads: int = 1) -> None:
    """Sets the number of worker threads used by 'fiberMap'."""
    global THREADS

    if threads < 1:
        raise ValueError("Number of threads has to be positive, got %d." % threads)

    THREADS = threads


def fiberMap(function: Callable, items: Iterable) -> List[any]:
    """Maps 'function' over 'items' preserving their order.

    Arguments:
    function -- callable applied to every item, Callable
    items -- fibers (or anything else) to process, Iterable

    Returns:
    results -- list of results in the order of 'items', list
    """

    if THREADS <= 1:
        return list(map(function, items))

    with futures.ThreadPoolExecutor(max_workers = THREADS) as executor:
        return list(executor.map(function, items))


######################
# Types
######################

@dataclass(frozen=True, eq=False)
class BlochOperator:
    """Family of fiber matrices aligned with the grid ordering."""

    matrices: numpy.ndarray

    @property
    def size(self) -> int:
        return self.matrices.shape[0]

    @property
    def n_b(self) -> int:
        return self.matrices.shape[1]

    def fiber(self, index: int) -> numpy.ndarray:
        return self.matrices[index]


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Ascending eigenvalues and orthonormal eigenvectors of one fiber."""

    eigenvalues: numpy.ndarray
    eigenvectors: numpy.ndarray
    fiber: int = 0

    @property
    def positive(self) -> numpy.ndarray:
        return self.eigenvalues > 0

    def reconstruct(self) -> numpy.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T


@dataclass(frozen=True, eq=False)
class DensityFourier:
    """Fourier coefficients of the periodic density.

    'coefficients' are stored on the (4 k_cut + 1)^3 cube of mode
    differences in the shift ordering of the basis.
    """

    coefficients: numpy.ndarray
    shifts: numpy.ndarray
    ell: float


    def value(self, p: numpy.ndarray) -> complex:
        _hit = numpy.all(self.shifts == numpy.asarray(p), axis = 1)

        if not numpy.any(_hit):
            return 0j

        return complex(self.coefficients[numpy.argmax(_hit)])


    def realSpace(self, x: numpy.ndarray) -> numpy.ndarray:
        """Evaluates the density at points 'x' (m x 3) of the cell."""
        _phase = numpy.exp(2j * numpy.pi * numpy.atleast_2d(x) @ self.shifts.T / self.ell)
        return numpy.real(_phase @ self.coefficients)


@dataclass(frozen=True, eq=False)
class Context:
    """Precomputed, read-only data shared by all operators."""

    params: ModelParams
    grid: BrillouinGrid
    basis: PlaneWaveBasis
    weights: RegularizedWeights
    g_hat: numpy.ndarray
    coulomb: numpy.ndarray
    free: numpy.ndarray
    external: numpy.ndarray
    laplace_quarter: numpy.ndarray
    dirac_root: numpy.ndarray


######################
# Utilities
######################

def hermitize(matrix: numpy.ndarray) -> numpy.ndarray:
    """Keeps the upper triangle and mirrors it, works on stacks."""

    _upper = numpy.triu(matrix, 1)
    _diagonal = numpy.real(numpy.diagonal(matrix, axis1 = -2, axis2 = -1))

    _eye = numpy.eye(matrix.shape[-1])

    return _upper + numpy.conj(numpy.swapaxes(_upper, -1, -2)) + _diagonal[..., :, None] * _eye


def denseStack(gamma: any) -> numpy.ndarray:
    """Dense N x n_b x n_b stack of a density matrix or operator."""

    if hasattr(gamma, "dense"):
        return gamma.dense()

    if isinstance(gamma, BlochOperator):
        return gamma.matrices

    return numpy.asarray(gamma)


def traceProduct(a: numpy.ndarray, b: numpy.ndarray) -> float:
    """Grid average of Re Tr[a_xi b_xi]."""
    _a = denseStack(a)
    _b = denseStack(b)

    return float(numpy.real(numpy.sum(_a * numpy.swapaxes(_b, -1, -2))) / _a.shape[0])


def traces(gamma: any) -> numpy.ndarray:
    """Per fiber traces of a dense stack."""
    return numpy.real(numpy.trace(denseStack(gamma), axis1 = -2, axis2 = -1))


######################
# Fiber operators
######################

def diracFiber(xi: numpy.ndarray, basis: PlaneWaveBasis, params: ModelParams) -> numpy.ndarray:
    """Free Dirac operator D_xi in the plane-wave basis.

    Arguments:
    xi -- quasi-momentum, 3 numpy.ndarray
    basis -- plane-wave basis, PlaneWaveBasis
    params -- model parameters, ModelParams

    Returns:
    D -- block diagonal matrix c alpha.p + c^2 beta, n_b x n_b numpy.ndarray
    """

    _p = basis.momenta(xi)
    _blocks = params.c * numpy.einsum("mj,jab->mab", _p, ALPHA) + params.c ** 2 * BETA[None, :, :]

    _nm = basis.n_modes
    _matrix = numpy.zeros((_nm, 4, _nm, 4), dtype = complex)

    _idx = numpy.arange(_nm)
    _matrix[_idx, :, _idx, :] = _blocks

    return hermitize(_matrix.reshape((basis.n_b, basis.n_b)))


def coulombSymbol(basis: PlaneWaveBasis) -> numpy.ndarray:
    """Fourier coefficients g(p) = 1/(pi ell |p|^2), g(0) = 0, over all shifts."""

    _p2 = numpy.sum(basis.shifts ** 2, axis = 1).astype(float)
    _g = numpy.zeros(_p2.shape)

    _nonzero = _p2 > 0
    _g[_nonzero] = 1.0 / (numpy.pi * basis.ell * _p2[_nonzero])

    return _g


def coulombMatrix(basis: PlaneWaveBasis, params: ModelParams = None, xi: numpy.ndarray = None) -> numpy.ndarray:
    """Multiplication by the periodic Coulomb potential G_ell.

    The matrix does not depend on the fiber, 'xi' is accepted for
    symmetry with 'diracFiber'.

    Returns:
    G -- entries g(m - m') between equal spinor components, n_b x n_b numpy.ndarray
    """

    _g = coulombSymbol(basis)

    return numpy.kron(_g[basis.diff_index], numpy.eye(basis.spinor_dim)).astype(complex)


def densityFourier(gamma: any, basis: PlaneWaveBasis, grid: BrillouinGrid = None) -> DensityFourier:
    """Fourier coefficients of the density rho_gamma.

    rho(p) = ell^-3 avg_xi sum_m <coef(m + p)|coef(m)>, summed over
    the spinor components.

    Arguments:
    gamma -- density matrix or dense stack, BlochDensityMatrix or N x n_b x n_b numpy.ndarray
    basis -- plane-wave basis, PlaneWaveBasis
    grid -- unused, accepted for the signature of the other operators

    Returns:
    rho -- coefficients over all shifts, DensityFourier
    """

    _stack = denseStack(gamma)
    _mean = numpy.mean(_stack, axis = 0)

    _nm = basis.n_modes
    _spinor_trace = numpy.trace(_mean.reshape((_nm, 4, _nm, 4)), axis1 = 1, axis2 = 3)

    _n_shifts = basis.shifts.shape[0]
    _index = basis.diff_index.ravel()

    _real = numpy.bincount(_index, weights = numpy.real(_spinor_trace).ravel(), minlength = _n_shifts)
    _imag = numpy.bincount(_index, weights = numpy.imag(_spinor_trace).ravel(), minlength = _n_shifts)

    return DensityFourier(coefficients = (_real + 1j * _imag) / basis.ell ** 3, shifts = basis.shifts, ell = basis.ell)


def hartreeMatrix(rho: DensityFourier, basis: PlaneWaveBasis) -> numpy.ndarray:
    """Multiplication by rho * G_ell, symbol ell^3 g(p) rho(p)."""

    _symbol = basis.ell ** 3 * coulombSymbol(basis) * rho.coefficients

    return hermitize(numpy.kron(_symbol[basis.diff_index], numpy.eye(basis.spinor_dim)))


######################
# Exchange
######################

def _shiftSum(stack: numpy.ndarray, table: numpy.ndarray, basis: PlaneWaveBasis) -> numpy.ndarray:
    """sum_xi' sum_k w[k, xi', target] gamma_xi'[(a - k, s), (b - k, s')].

    Arguments:
    stack -- source fibers, N x n_b x n_b numpy.ndarray
    table -- weights per shift, source and target, S x N x T numpy.ndarray
    basis -- plane-wave basis, PlaneWaveBasis

    Returns:
    sums -- T x n_b x n_b numpy.ndarray
    """

    _m = basis.side
    _s = basis.spinor_dim
    _n = stack.shape[0]
    _targets = table.shape[2]

    _cube = stack.reshape((_n, _m, _m, _m, _s, _m, _m, _m, _s))
    _out = numpy.zeros((_targets, _m, _m, _m, _s, _m, _m, _m, _s), dtype = complex)

    _all = slice(None)

    for _i, _k in enumerate(basis.shifts):
        _w = table[_i]

        if not numpy.any(_w):
            continue

        _dst, _src = basis.shiftSlices(_k)

        _source = (_all, ) + _src + (_all, ) + _src + (_all, )
        _destination = (_all, ) + _dst + (_all, ) + _dst + (_all, )

        _out[_destination] += numpy.tensordot(_w, _cube[_source], axes = (0, 0))

    return _out.reshape((_targets, basis.n_b, basis.n_b))


def exchangeMatrices(gamma: any, context: Context, targets: numpy.ndarray = None) -> numpy.ndarray:
    """Exchange operators W_{gamma,xi} for (a subset of) the grid fibers.

    (W_xi)_{(a,s),(b,s')} = (4 pi/ell^3) avg_xi' sum_k w(k, xi', xi) gamma_xi'[(a-k,s),(b-k,s')]

    Arguments:
    gamma -- density matrix or dense stack, BlochDensityMatrix or N x n_b x n_b numpy.ndarray
    context -- operator context, Context
    targets -- indices of the target fibers, int numpy.ndarray, default None (all)

    Returns:
    W -- T x n_b x n_b numpy.ndarray

    Raises:
    ValueError -- when gamma does not match the grid or the basis
    """

    _stack = denseStack(gamma)
    _grid = context.grid
    _basis = context.basis

    if _stack.shape != (_grid.size, _basis.n_b, _basis.n_b):
        raise ValueError("Density matrix of shape %s does not match %d fibers with %d basis functions." % (_stack.shape, _grid.size, _basis.n_b))

    if targets is None:
        targets = numpy.arange(_grid.size)

    _table = context.weights.table[:, :, numpy.asarray(targets)]

    return hermitize(_shiftSum(_stack, _table, _basis) * (4 * numpy.pi / _grid.ell ** 3) / _grid.size)


def exchangeMatrix(gamma: any, fiber: int, context: Context) -> numpy.ndarray:
    """Exchange operator W_{gamma,xi} at grid fiber 'fiber'."""
    return exchangeMatrices(gamma, context, targets = numpy.asarray([fiber]))[0]


def exchangeMatrixNaive(gamma: any, fiber: int, context: Context) -> numpy.ndarray:
    """Reference assembly of W_{gamma,xi} by explicit loops over fibers, shifts and modes."""

    _stack = denseStack(gamma)
    _grid = context.grid
    _basis = context.basis
    _table = context.weights.table

    _s = _basis.spinor_dim
    _out = numpy.zeros((_basis.n_b, _basis.n_b), dtype = complex)

    for _source in range(_grid.size):
        for _i, _k in enumerate(_basis.shifts):
            _w = _table[_i, _source, fiber]

            for _a, _ma in enumerate(_basis.modes):
                _ka = _ma - _k

                if numpy.max(numpy.abs(_ka)) > _basis.k_cut:
                    continue

                _ia = _basis.modeIndex(_ka)

                for _b, _mb in enumerate(_basis.modes):
                    _kb = _mb - _k

                    if numpy.max(numpy.abs(_kb)) > _basis.k_cut:
                        continue

                    _ib = _basis.modeIndex(_kb)

                    _out[_s * _a:_s * (_a + 1), _s * _b:_s * (_b + 1)] += _w * _stack[_source, _s * _ia:_s * (_ia + 1), _s * _ib:_s * (_ib + 1)]

    return _out * (4 * numpy.pi / _grid.ell ** 3) / _grid.size


def exchangeAt(gamma: any, xi: numpy.ndarray, context: Context) -> numpy.ndarray:
    """Exchange operator at an off-grid quasi-momentum, gamma frozen on the grid."""

    _stack = denseStack(gamma)
    _grid = context.grid

    _table = offgridWeights(_grid, context.basis, xi)[:, :, None]

    return hermitize(_shiftSum(_stack, _table, context.basis)[0] * (4 * numpy.pi / _grid.ell ** 3) / _grid.size)


######################
# Context
######################

def contextBuild(params: ModelParams, grid: BrillouinGrid = None, weights: RegularizedWeights = None) -> Context:
    """Precomputes the grid, basis, weights and free operators.

    Arguments:
    params -- model parameters, ModelParams
    grid -- Brillouin zone grid, BrillouinGrid, default built from params
    weights -- regularized weights, RegularizedWeights, default built from params

    Returns:
    context -- read-only operator context, Context
    """

    _grid = grid if grid is not None else gridBuild(params)
    _basis = basisBuild(params)
    _weights = weights if weights is not None else weightsBuild(_grid, _basis, params.subsample)

    _coulomb = coulombMatrix(_basis, params)

    _free = numpy.asarray(fiberMap(lambda xi: diracFiber(xi, _basis, params), _grid.points))
    _external = hermitize(_free - params.z * _coulomb[None, :, :])

    _p2 = numpy.asarray([ _basis.momentumSquared(xi) for xi in _grid.points ])

    log.log("context:built fibers:%d n_b:%d singular_weight:%.12e" % (_grid.size, _basis.n_b, _weights.singular_value), 2)

    return Context(
        params = params,
        grid = _grid,
        basis = _basis,
        weights = _weights,
        g_hat = coulombSymbol(_basis),
        coulomb = _coulomb,
        free = _free,
        external = _external,
        laplace_quarter = (1 + _p2) ** 0.25,
        dirac_root = (params.c ** 4 + params.c ** 2 * _p2) ** 0.25,
    )


######################
# Mean field
######################

def interactionParts(gamma: any, context: Context) -> Tuple[DensityFourier, numpy.ndarray, numpy.ndarray]:
    """Hartree and exchange pieces of V_gamma.

    Returns:
    rho -- density of gamma, DensityFourier
    hartree -- rho * G_ell, n_b x n_b numpy.ndarray
    exchange -- W_{gamma,xi} for all fibers, N x n_b x n_b numpy.ndarray
    """

    _stack = denseStack(gamma)

    _rho = densityFourier(_stack, context.basis)

    return _rho, hartreeMatrix(_rho, context.basis), exchangeMatrices(_stack, context)


def meanField(gamma: any, context: Context, parts: Tuple[DensityFourier, numpy.ndarray, numpy.ndarray] = None) -> BlochOperator:
    """Mean-field operator D_gamma = D - z G + alpha (rho * G - W_gamma).

    Arguments:
    gamma -- density matrix, BlochDensityMatrix or dense stack
    context -- operator context, Context
    parts -- precomputed output of 'interactionParts', 3-tuple, default None

    Returns:
    D_gamma -- one matrix per fiber, BlochOperator
    """

    _alpha = context.params.alpha

    if _alpha == 0:
        return BlochOperator(matrices = context.external.copy())

    if parts is None:
        parts = interactionParts(gamma, context)

    _, _hartree, _exchange = parts

    return BlochOperator(matrices = hermitize(context.external + _alpha * (_hartree[None, :, :] - _exchange)))


def meanFieldAt(xi: numpy.ndarray, gamma: any, context: Context, rho: DensityFourier = None) -> numpy.ndarray:
    """D_{gamma,xi} at an arbitrary quasi-momentum with gamma frozen on the grid."""

    _params = context.params
    _matrix = diracFiber(xi, context.basis, _params) - _params.z * context.coulomb

    if _params.alpha != 0:
        _stack = denseStack(gamma)

        if rho is None:
            rho = densityFourier(_stack, context.basis)

        _matrix = _matrix + _params.alpha * (hartreeMatrix(rho, context.basis) - exchangeAt(_stack, xi, context))

    return hermitize(_matrix)


######################
# Spectra
######################

def spectralDecomp(matrix: numpy.ndarray, fiber: int = 0) -> SpectralDecomp:
    """Ascending eigen-decomposition with a fixed eigenvector phase.

    The largest-magnitude entry of every eigenvector is made real
    and positive (first one on ties).

    Raises:
    EigensolverError -- when LAPACK does not converge
    """

    try:
        _values, _vectors = scipy.linalg.eigh(matrix)
    except (numpy.linalg.LinAlgError, ValueError) as e:
        raise EigensolverError(fiber, str(e))

    return SpectralDecomp(eigenvalues = _values, eigenvectors = phaseFix(_vectors), fiber = fiber)


def phaseFix(vectors: numpy.ndarray) -> numpy.ndarray:
    """Rotates columns so that their largest entry is real positive."""

    if vectors.shape[1] == 0:
        return vectors

    _rows = numpy.argmax(numpy.abs(vectors), axis = 0)
    _pivot = vectors[_rows, numpy.arange(vectors.shape[1])]

    return vectors * (numpy.abs(_pivot) / _pivot)[None, :]


def spectraCompute(operator: BlochOperator) -> List[SpectralDecomp]:
    """Decomposes every fiber of 'operator'."""
    return fiberMap(lambda i: spectralDecomp(operator.matrices[i], i), range(operator.size))


def zeroModeCheck(decomp: SpectralDecomp, params: ModelParams) -> None:
    """Raises ZeroModeAmbiguity when an eigenvalue is within the zero tolerance."""

    _close = numpy.abs(decomp.eigenvalues) < params.zero_tol

    if numpy.any(_close):
        raise ZeroModeAmbiguity(decomp.fiber, float(decomp.eigenvalues[numpy.argmax(_close)]))


def positiveProjector(decomp: SpectralDecomp, params: ModelParams) -> numpy.ndarray:
    """Spectral projector P+ onto the positive eigenvalues.

    Raises:
    ZeroModeAmbiguity -- when an eigenvalue lies within 1e-8 c^2 of 0
    """

    zeroModeCheck(decomp, params)

    _v = decomp.eigenvectors[:, decomp.positive]

    return hermitize(_v @ _v.conj().T)


def spectralGapCheck(spectra: List[SpectralDecomp], lambda0: float, params: ModelParams) -> Tuple[float, float]:
    """Smallest |eigenvalue| over all fibers against the bound c^2 lambda0.

    Returns:
    gap -- min over fibers of min |sigma(D_gamma,xi)|, float
    bound -- c^2 lambda0, float
    """

    _gap = float(min([ numpy.min(numpy.abs(_s.eigenvalues)) for _s in spectra ]))
    _bound = params.c ** 2 * lambda0

    log.log("gap:%.12e bound:%.12e holds:%s" % (_gap, _bound, _gap >= _bound), 2)

    return _gap, _bound
