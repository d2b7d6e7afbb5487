#!/usr/bin/env python3
# model.py
"""Model core: parameters, Brillouin-zone grid, plane-wave basis
and the regularized 1/|eta|^2 weights.

The crystal is the cubic lattice of side 'ell' with one nucleus
of charge 'z' per cell and 'q' electrons per cell. Quasi-momenta
xi live in the reciprocal cell [-pi/ell, pi/ell)^3, every fiber
is discretized by 4-spinor plane waves e^{i(xi + 2 pi k/ell) x}
with |k|_inf <= k_cut.
"""
######################
# Imports & Globals
######################

import numpy

import itertools

from dataclasses import dataclass, field, replace, asdict

# Typing
from typing import Dict, Tuple

from dfcrystal.errors import ResonanceError


# Parameters
from dfcrystal.parameter import *
P = ParameterList()
P.createAdd("ell", None, float, "Side of the cubic cell.", "model", bounds=(1e-12, float("inf")))
P.createAdd("z", 0.0, float, "Nuclear charge per cell.", "model", bounds=(0.0, float("inf")))
P.createAdd("q", None, int, "Number of electrons per cell.", "model", bounds=(1, 10**6))
P.createAdd("alpha", None, float, "Fine structure constant (0 selects the linear reference model).", "model", bounds=(0.0, 1.0))
P.createAdd("c", None, float, "Speed of light.", "model", bounds=(1.0, float("inf")))
P.createAdd("k_cut", 1, int, "Plane-wave cutoff, modes with |k|_inf <= k_cut.", "model", bounds=(0, 16))
P.createAdd("n_xi", 2, int, "Brillouin-zone grid points per axis.", "model", bounds=(1, 64))
P.createAdd("eps_pen_margin", None, float, "Margin eps in eps_P = c*(q+1) + eps. Default 0.1 c^2.", "model", bounds=(1e-300, float("inf")))
P.createAdd("retraction_tol", None, float, "Step norm stopping the retraction. Default 1e-10 c^2.", "model", bounds=(0.0, float("inf")))
P.createAdd("retraction_max_iter", 200, int, "Iteration limit of the retraction.", "model", bounds=(1, 100000))
P.createAdd("scf_energy_tol", None, float, "Energy change stopping the SCF. Default 1e-11 q c^2.", "model", bounds=(0.0, float("inf")))
P.createAdd("scf_residual_tol", 1e-8, float, "Residual of the SCF equation stopping the SCF.", "model", bounds=(0.0, float("inf")))
P.createAdd("scf_max_iter", 100, int, "Iteration limit of the SCF.", "model", bounds=(1, 100000))
P.createAdd("occupation_tol", 1e-8, float, "Tolerance on occupations and traces.", "model", bounds=(0.0, 1.0))
P.createAdd("subsample", 64, int, "Sub-sampling resolution of the singular voxel average (even).", "model", bounds=(2, 4096))


######################
# ModelParams
######################

@dataclass(frozen=True)
class ModelParams:
    """Physical constants and discretization controls.

    Tolerances left as None are filled with their scale-aware
    defaults on construction.
    """

    ell: float
    z: float
    q: int
    alpha: float
    c: float
    k_cut: int = 1
    n_xi: int = 2
    eps_pen_margin: float = None
    retraction_tol: float = None
    retraction_max_iter: int = 200
    scf_energy_tol: float = None
    scf_residual_tol: float = 1e-8
    scf_max_iter: int = 100
    occupation_tol: float = 1e-8
    subsample: int = 64


    def __post_init__(self):
        _values = P.validate(asdict(self), "model")

        for _name in ["ell", "q", "alpha", "c"]:
            if _values[_name] is None:
                raise ValueError("Parameter '%s' is required in 'model'." % _name)

        for _name, _value in _values.items():
            object.__setattr__(self, _name, _value)

        if self.subsample % 2 != 0:
            raise ValueError("Parameter 'subsample' has to be even, so that no sample hits the singular point.")

        if self.eps_pen_margin is None:
            object.__setattr__(self, "eps_pen_margin", 0.1 * self.c ** 2)

        if self.retraction_tol is None:
            object.__setattr__(self, "retraction_tol", 1e-10 * self.c ** 2)

        if self.scf_energy_tol is None:
            object.__setattr__(self, "scf_energy_tol", 1e-11 * self.q * self.c ** 2)


    @classmethod
    def fromDict(cls, values: Dict[str, any]) -> "ModelParams":
        """Builds the parameters from a configuration block."""
        return cls(**P.validate(values, "model"))


    def replace(self, **changes) -> "ModelParams":
        """Copy with some fields changed (defaults are not re-derived)."""
        return replace(self, **changes)


    def dict(self) -> Dict[str, any]:
        return asdict(self)


    @property
    def alpha_c(self) -> float:
        return self.alpha / self.c

    @property
    def z_c(self) -> float:
        return self.z / self.c

    @property
    def n_modes(self) -> int:
        return (2 * self.k_cut + 1) ** 3

    @property
    def n_b(self) -> int:
        return 4 * self.n_modes

    @property
    def tie_tol(self) -> float:
        """Width of the Fermi tie band."""
        return 1e-9 * self.c ** 2

    @property
    def zero_tol(self) -> float:
        """Eigenvalues closer to zero make P+ ambiguous."""
        return 1e-8 * self.c ** 2


######################
# Brillouin zone grid
######################

@dataclass(frozen=True, eq=False)
class BrillouinGrid:
    """Uniform midpoint grid of the reciprocal cell.

    Points are ordered lexicographically. The midpoint grid is closed
    under xi -> -xi without wrapping, no point lies on the boundary.
    """

    ell: float
    n_xi: int
    points: numpy.ndarray
    spacing: float


    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def weight(self) -> float:
        return 1.0 / self.size

    @property
    def weights(self) -> numpy.ndarray:
        return numpy.full(self.size, self.weight)

    @property
    def period(self) -> float:
        """Side of the reciprocal cell."""
        return 2 * numpy.pi / self.ell


    def minimumImage(self, d: numpy.ndarray) -> numpy.ndarray:
        """Wraps differences of quasi-momenta onto the reciprocal torus."""
        return d - self.period * numpy.round(d / self.period)


    def nearest(self, xi: numpy.ndarray) -> int:
        """Index of the grid point closest to 'xi' (periodic distance)."""
        return int(numpy.argmin(numpy.sum(self.minimumImage(self.points - numpy.asarray(xi)) ** 2, axis = 1)))


    def negatedIndex(self) -> numpy.ndarray:
        """Index map i -> j with xi_j = -xi_i."""
        _n = self.n_xi
        _idx = numpy.arange(self.size).reshape(_n, _n, _n)

        return _idx[::-1, ::-1, ::-1].ravel()


    def descriptor(self) -> Dict[str, any]:
        return {"n_xi": self.n_xi, "ell": self.ell}


def gridBuild(params: ModelParams) -> BrillouinGrid:
    """Builds the midpoint grid of Q*_ell.

    Arguments:
    params -- model parameters, ModelParams

    Returns:
    grid -- n_xi^3 points with weights 1/n_xi^3, BrillouinGrid
    """

    _h = 2 * numpy.pi / (params.ell * params.n_xi)
    _axis = -numpy.pi / params.ell + (numpy.arange(params.n_xi) + 0.5) * _h

    _points = numpy.asarray(list(itertools.product(_axis, repeat = 3)), dtype = float)

    return BrillouinGrid(ell = params.ell, n_xi = params.n_xi, points = _points, spacing = _h)


######################
# Plane-wave basis
######################

@dataclass(frozen=True, eq=False)
class PlaneWaveBasis:
    """4-spinor plane-wave basis of one fiber.

    Flat index of (mode m, spinor s) is 4 * m + s, modes are ordered
    lexicographically in (k1, k2, k3). Reciprocal shifts are all
    mode differences, |k|_inf <= 2 k_cut, in the same order.
    """

    k_cut: int
    ell: float
    modes: numpy.ndarray
    shifts: numpy.ndarray
    diff_index: numpy.ndarray
    spinor_dim: int = 4


    @property
    def side(self) -> int:
        return 2 * self.k_cut + 1

    @property
    def diff_side(self) -> int:
        return 4 * self.k_cut + 1

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def n_b(self) -> int:
        return self.spinor_dim * self.n_modes

    @property
    def zero_shift(self) -> int:
        """Index of k = 0 among the shifts."""
        return (self.shifts.shape[0] - 1) // 2


    def flatten(self, mode: int, spinor: int) -> int:
        return self.spinor_dim * mode + spinor


    def unflatten(self, index: int) -> Tuple[int, int]:
        return divmod(index, self.spinor_dim)


    def modeIndex(self, k: numpy.ndarray) -> int:
        """Position of an integer mode in the lexicographic order."""
        _k = numpy.asarray(k) + self.k_cut
        return int((_k[0] * self.side + _k[1]) * self.side + _k[2])


    def shiftIndex(self, k: numpy.ndarray) -> int:
        """Position of a reciprocal shift (mode difference)."""
        _k = numpy.asarray(k) + 2 * self.k_cut
        return int((_k[0] * self.diff_side + _k[1]) * self.diff_side + _k[2])


    def momenta(self, xi: numpy.ndarray) -> numpy.ndarray:
        """Momenta xi + 2 pi k / ell of all modes, n_modes x 3."""
        return numpy.asarray(xi, dtype = float)[None, :] + 2 * numpy.pi * self.modes / self.ell


    def momentumSquared(self, xi: numpy.ndarray) -> numpy.ndarray:
        """|xi + 2 pi k / ell|^2 repeated per spinor component, n_b."""
        return numpy.repeat(numpy.sum(self.momenta(xi) ** 2, axis = 1), self.spinor_dim)


    def shiftSlices(self, k: numpy.ndarray) -> Tuple[Tuple[slice, ...], Tuple[slice, ...]]:
        """Index ranges of modes a (destination) and a - k (source) inside the cube.

        Returns:
        destination -- three slices selecting modes a with a and a - k retained
        source -- three slices selecting the modes a - k
        """
        _dst = []
        _src = []

        for _kj in k:
            _lo = max(0, _kj)
            _hi = self.side + min(0, _kj)
            _dst.append(slice(_lo, _hi))
            _src.append(slice(_lo - _kj, _hi - _kj))

        return tuple(_dst), tuple(_src)


def basisBuild(params: ModelParams) -> PlaneWaveBasis:
    """Builds the plane-wave basis.

    Arguments:
    params -- model parameters, ModelParams

    Returns:
    basis -- n_b = 4 (2 k_cut + 1)^3 spinor plane waves, PlaneWaveBasis
    """

    _k = params.k_cut
    _modes = numpy.asarray(list(itertools.product(range(-_k, _k + 1), repeat = 3)), dtype = int)
    _shifts = numpy.asarray(list(itertools.product(range(-2 * _k, 2 * _k + 1), repeat = 3)), dtype = int)

    _diff = _modes[:, None, :] - _modes[None, :, :] + 2 * _k
    _ds = 4 * _k + 1
    _diff_index = (_diff[..., 0] * _ds + _diff[..., 1]) * _ds + _diff[..., 2]

    return PlaneWaveBasis(k_cut = _k, ell = params.ell, modes = _modes, shifts = _shifts, diff_index = _diff_index)


######################
# Regularized weights
######################

@dataclass(frozen=True, eq=False)
class RegularizedWeights:
    """Table of w(k, xi_i, xi_j) = 1/|2 pi k/ell - (xi_i - xi_j)|^2.

    'table[s, i, j]' belongs to the shift 'shifts[s]'. The singular
    entries (k = 0, i = j) hold the voxel average of 1/|eta|^2.
    """

    table: numpy.ndarray
    shifts: numpy.ndarray
    singular_value: float
    subsample: int
    spacing: float


    @property
    def zero_shift(self) -> int:
        return (self.shifts.shape[0] - 1) // 2


    def inverseSquare(self) -> numpy.ndarray:
        """Kernel 1/|xi_i - xi_j|^2 of the convolution norm, N x N."""
        return self.table[self.zero_shift]


    def kernelAverage(self) -> float:
        """C_Y = sup_xi of the grid average of 1/|xi - xi'|^2."""
        _kernel = self.inverseSquare()
        return float(numpy.max(numpy.sum(_kernel, axis = 1)) / _kernel.shape[1])


def voxelAverage(spacing: float, subsample: int) -> float:
    """Average of 1/|eta|^2 over the cube of side 'spacing' centered at 0.

    Arguments:
    spacing -- side of the voxel, float
    subsample -- midpoint samples per axis, even int

    Returns:
    average -- midpoint estimate of the voxel average, float

    Note: The cube is symmetric, one octant is sampled.
    """

    if subsample < 2 or subsample % 2 != 0:
        raise ValueError("Sub-sampling resolution has to be even and >= 2, got %s." % subsample)

    _a = (numpy.arange(subsample // 2) + 0.5) / subsample
    _r2 = _a[:, None, None] ** 2 + _a[None, :, None] ** 2 + _a[None, None, :] ** 2

    return float(numpy.mean(1.0 / _r2) / spacing ** 2)


def weightsBuild(grid: BrillouinGrid, basis: PlaneWaveBasis, subsample: int = 64) -> RegularizedWeights:
    """Builds the regularized weight table for all shifts and grid pairs.

    Arguments:
    grid -- Brillouin zone grid, BrillouinGrid
    basis -- plane-wave basis providing the shifts, PlaneWaveBasis
    subsample -- resolution of the singular voxel average, even int, default 64

    Returns:
    weights -- regularized table, RegularizedWeights

    Raises:
    ResonanceError -- when a non-singular denominator vanishes on the grid
    """

    _singular = voxelAverage(grid.spacing, subsample)

    _g = 2 * numpy.pi * basis.shifts / grid.ell
    _d = grid.points[:, None, :] - grid.points[None, :, :]
    _den = numpy.sum((_g[:, None, None, :] - _d[None, :, :, :]) ** 2, axis = 3)

    _mask = numpy.zeros(_den.shape, dtype = bool)
    _mask[basis.zero_shift] = numpy.eye(grid.size, dtype = bool)

    if numpy.any(_den[~_mask] < 1e-12 * grid.spacing ** 2):
        raise ResonanceError("Non-singular denominator below 1e-12 h^2, unexpected on-grid resonance.")

    _den[_mask] = 1.0
    _table = 1.0 / _den
    _table[_mask] = _singular

    return RegularizedWeights(table = _table, shifts = basis.shifts, singular_value = _singular, subsample = subsample, spacing = grid.spacing)


######################
# Off-grid weights
######################

def _directions(n_mu: int = 48, n_phi: int = 96) -> Tuple[numpy.ndarray, numpy.ndarray]:
    """Product quadrature on the unit sphere (Gauss-Legendre in cos, uniform in phi)."""
    _mu, _wmu = numpy.polynomial.legendre.leggauss(n_mu)
    _phi = (numpy.arange(n_phi) + 0.5) * 2 * numpy.pi / n_phi

    _sin = numpy.sqrt(1 - _mu ** 2)
    _u = numpy.stack([
        (_sin[:, None] * numpy.cos(_phi)[None, :]).ravel(),
        (_sin[:, None] * numpy.sin(_phi)[None, :]).ravel(),
        numpy.repeat(_mu, n_phi),
    ], axis = 1)

    return _u, numpy.repeat(_wmu, n_phi) * (2 * numpy.pi / n_phi)


DIRECTIONS, DIRECTION_WEIGHTS = _directions()


def chordAverage(centers: numpy.ndarray, spacing: float) -> numpy.ndarray:
    """Average of 1/|eta|^2 over cubes of side 'spacing' at 'centers'.

    Integrates the length of the ray segment from the origin inside
    the cube over the unit sphere, which stays bounded and continuous
    when the origin lies inside or on the cube.

    Arguments:
    centers -- centers of the cubes, mx3 numpy.ndarray
    spacing -- side of the cubes, float

    Returns:
    averages -- cube averages, m numpy.ndarray
    """

    _centers = numpy.atleast_2d(centers)
    _u = DIRECTIONS

    _lo = (_centers[:, None, :] - spacing / 2) / _u[None, :, :]
    _hi = (_centers[:, None, :] + spacing / 2) / _u[None, :, :]

    _near = numpy.max(numpy.minimum(_lo, _hi), axis = 2)
    _far = numpy.min(numpy.maximum(_lo, _hi), axis = 2)

    _length = numpy.maximum(0.0, _far - numpy.maximum(_near, 0.0))

    return (_length @ DIRECTION_WEIGHTS) / spacing ** 3


def pairWeights(g: numpy.ndarray, sources: numpy.ndarray, targets: numpy.ndarray, singular_value: float) -> numpy.ndarray:
    """Pointwise weights 1/|g - (xi' - xi)|^2 between arbitrary point sets.

    Arguments:
    g -- reciprocal shifts 2 pi k/ell, sx3 numpy.ndarray
    sources -- points xi', mx3 numpy.ndarray
    targets -- points xi, nx3 numpy.ndarray
    singular_value -- value used where the denominator is exactly 0, float

    Returns:
    weights -- s x m x n numpy.ndarray
    """

    _d = sources[:, None, :] - targets[None, :, :]
    _den = numpy.sum((g[:, None, None, :] - _d[None, :, :, :]) ** 2, axis = 3)

    _zero = _den == 0.0
    _den[_zero] = 1.0
    _w = 1.0 / _den
    _w[_zero] = singular_value

    return _w


def offgridWeights(grid: BrillouinGrid, basis: PlaneWaveBasis, xi: numpy.ndarray) -> numpy.ndarray:
    """Weights w(k, xi_j, xi) for an arbitrary target quasi-momentum.

    Entries whose singular point lies in the voxel of the source
    point use the exact voxel average, the others the pointwise value.

    Returns:
    weights -- n_shifts x N numpy.ndarray
    """

    _g = 2 * numpy.pi * basis.shifts / grid.ell
    _d = _g[:, None, :] - (grid.points[None, :, :] - numpy.asarray(xi, dtype = float)[None, None, :])

    _near = numpy.max(numpy.abs(_d), axis = 2) < grid.spacing / 2
    _den = numpy.sum(_d ** 2, axis = 2)

    _w = numpy.empty(_den.shape)
    _w[~_near] = 1.0 / _den[~_near]

    if numpy.any(_near):
        _w[_near] = chordAverage(_d[_near], grid.spacing)

    return _w
