#!/usr/bin/env python3
# main.py
"""Quadratic form of the two-ball direction against the ball radius."""
######################
# Imports & Globals
######################

import numpy, sys

from scipy.optimize import curve_fit
from scipy.integrate import quad

from tqdm import tqdm

from dataclasses import dataclass, field

from dfcrystal.errors import EmptyBall, PropertyViolated
from dfcrystal.model import BrillouinGrid, gridBuild, pairWeights, voxelAverage
from dfcrystal.operators import Context, denseStack, densityFourier, meanFieldAt, spectralDecomp, phaseFix, fiberMap
from dfcrystal.states import BlochDensityMatrix

import dfcrystal.log as log

# Thread lock for log file
from threading import Lock

# Typing
from typing import Dict, List, Optional, TextIO, Tuple


# Global variables
LOGFILE = sys.stdout
VERBOSITY = 1
FILELOCK = Lock()

# Projections of the reference smaller than this fall back to the eigenvector
PROJECTION_FLOOR = 1e-3


# Parameters
from dfcrystal.parameter import *
P = ParameterList()
P.createAdd("lambda_list", [], list, "Ball radii; empty selects 'lambda_factors' times the fine spacing.", "run")
P.createAdd("lambda_factors", [], list, "Ball radii in units of the fine grid spacing; empty selects the shells of the ball grid.", "run")
P.createAdd("lambda_count", 6, int, "Number of shell radii selected when no radii are given.", "run", bounds=(4, 64))
P.createAdd("lambda_max_factor", 6.0, float, "Largest shell radius in units of the fine grid spacing.", "run", bounds=(2.0, 64.0))
P.createAdd("fine_grid_factor", 1, int, "Refinement of the solver grid used for the balls.", "run", bounds=(1, 64))
P.createAdd("n_xi_fine", 0, int, "Points per axis of the ball grid, 0 uses fine_grid_factor * n_xi.", "run", bounds=(0, 64))
P.createAdd("xi1", [], list, "Center of the first ball, empty selects -(pi/2 ell)(1, 1, 1).", "run")
P.createAdd("xi2", [], list, "Center of the second ball, empty selects (pi/2 ell)(1, 1, 1).", "run")
P.createAdd("band", -1, int, "Index of the positive band dressing the balls, -1 selects band q - 1.", "run", bounds=(-1, 10**6))
P.createAdd("degeneracy_tol", 1e-8, float, "Relative width (in c^2) of a degenerate eigenspace.", "run", bounds=(0.0, 1.0))
P.createAdd("exponent_tol", 0.3, float, "Accepted distance of the fitted exponent from -2.", "run", bounds=(0.0, 10.0))
P.createAdd("oracle_tol", 0.3, float, "Accepted relative distance of the coefficient from the oracle.", "run", bounds=(0.0, 10.0))


######################
# Types
######################

@dataclass
class HLambda:
    """Two-ball direction h = eta |psi><psi| - eta' |psi'><psi'| on a grid.

    'weights' carry the sign and the normalization N / |ball|,
    'vectors' the band eigenvectors, both aligned with 'indices'.
    """

    grid: BrillouinGrid
    indices: numpy.ndarray
    weights: numpy.ndarray
    vectors: numpy.ndarray
    count1: int
    count2: int
    lam: float


    def dense(self) -> numpy.ndarray:
        """Dense stack on the ball grid (zero outside of the balls)."""
        _stack = numpy.zeros((self.grid.size, self.vectors.shape[1], self.vectors.shape[1]), dtype = complex)

        for _i, _w, _v in zip(self.indices, self.weights, self.vectors):
            _stack[_i] += _w * numpy.outer(_v, _v.conj())

        return _stack


    def trace(self) -> float:
        """Trace per cell, zero by construction."""
        return float(numpy.sum(self.weights * numpy.sum(numpy.abs(self.vectors) ** 2, axis = 1)) / self.grid.size)


@dataclass
class ScalingReport:
    """Tr[V_h h] over the ball radii with the power-law fits."""

    lam: List[float]
    lam_effective: List[float]
    values: List[float]
    hartree: List[float]
    exchange: List[float]
    counts: List[Tuple[int, int]]
    spacing: float
    intercept: float
    coefficient: float
    exponent: Optional[float]
    exponent_coefficient: Optional[float]
    oracle_coefficient: float
    oracle_values: List[float]
    pair_average: float
    properties: Dict[str, bool] = field(default_factory = dict)


    def header(self) -> List[str]:
        return ["lambda", "lambda_effective", "value", "fit", "oracle"]


    def rows(self) -> List[List[any]]:
        """CSV rows (lambda, lambda_effective, value, fit, oracle)."""
        return [
            [_l, _e, _v, self.intercept + self.coefficient / _e ** 2, _o]
            for _l, _e, _v, _o in zip(self.lam, self.lam_effective, self.values, self.oracle_values)
        ]


    def dict(self) -> Dict[str, any]:
        return {
            "lambda": self.lam,
            "lambda_effective": self.lam_effective,
            "values": self.values,
            "hartree": self.hartree,
            "exchange": self.exchange,
            "counts": [ list(_c) for _c in self.counts ],
            "spacing": self.spacing,
            "intercept": self.intercept,
            "coefficient": self.coefficient,
            "exponent": self.exponent,
            "exponent_coefficient": self.exponent_coefficient,
            "oracle_coefficient": self.oracle_coefficient,
            "oracle_values": self.oracle_values,
            "pair_average": self.pair_average,
            "properties": dict(self.properties),
        }


######################
# Oracle
######################

def pairDensity(s: float) -> float:
    """Density of the distance of two uniform points of the unit ball."""
    return 3 * s ** 2 - 2.25 * s ** 3 + 0.1875 * s ** 5


def ballPairAverage() -> float:
    """E|x - y|^-2 for x, y uniform in the unit ball (9/4)."""
    _value, _ = quad(lambda s: pairDensity(s) / s ** 2, 0.0, 2.0)
    return _value


def oracleCoefficient(ell: float) -> float:
    """Coefficient b of b / lambda^2 in Tr[V_h h] from the self-exchange of two balls."""
    return -2 * (4 * numpy.pi / ell ** 3) * ballPairAverage()


######################
# Construction
######################

def ballIndices(grid: BrillouinGrid, center: numpy.ndarray, lam: float) -> numpy.ndarray:
    """Grid points with periodic distance at most 'lam' from 'center'."""
    _d = grid.minimumImage(grid.points - numpy.asarray(center)[None, :])
    return numpy.nonzero(numpy.sum(_d ** 2, axis = 1) <= lam ** 2 * (1 + 1e-9))[0]


def bandVector(xi: numpy.ndarray, stack: numpy.ndarray, context: Context, rho: any, band: int, reference: numpy.ndarray = None, tol: float = 1e-8) -> numpy.ndarray:
    """Eigenvector of the frozen D_{gamma,xi} in the positive band 'band'.

    With a reference the vector is the normalized projection of the
    reference onto the degenerate eigenspace of the band.
    """

    _decomp = spectralDecomp(meanFieldAt(xi, stack, context, rho))
    _positive = numpy.nonzero(_decomp.positive)[0]

    if band >= _positive.shape[0]:
        raise ValueError("Band %d does not exist, only %d positive levels." % (band, _positive.shape[0]))

    _j = _positive[band]

    if reference is None:
        return _decomp.eigenvectors[:, _j]

    _space = _decomp.eigenvectors[:, numpy.abs(_decomp.eigenvalues - _decomp.eigenvalues[_j]) <= tol * context.params.c ** 2]
    _projected = _space @ (_space.conj().T @ reference)
    _norm = numpy.linalg.norm(_projected)

    if _norm < PROJECTION_FLOOR:
        return _decomp.eigenvectors[:, _j]

    return _projected / _norm


def hLambdaBuild(context: Context, gamma: any, xi1: numpy.ndarray, xi2: numpy.ndarray, lam: float, grid: BrillouinGrid,
        band: int = None, require_disjoint: bool = True, cache: Dict[Tuple[int, int], numpy.ndarray] = None) -> HLambda:
    """Builds the two-ball direction of radius 'lam'.

    Ball membership uses the periodic distance on 'grid'. Each ball
    gets the weight N / |ball| so that both indicators average to 1.
    The vectors of a ball are projections of the band eigenvector at
    its center onto the degenerate eigenspaces, which keeps the phase
    continuous inside the ball.

    Arguments:
    context -- operator context of the solver grid, Context
    gamma -- state frozen on the solver grid, BlochDensityMatrix or dense stack
    xi1 -- center of the positive ball, 3 numpy.ndarray
    xi2 -- center of the negative ball, 3 numpy.ndarray
    lam -- ball radius, float
    grid -- grid the balls are sampled on, BrillouinGrid
    band -- positive band index, int, default None (q - 1)
    require_disjoint -- reject overlapping balls, bool, default True
    cache -- vectors by (ball, grid index) shared between radii, dict, default None

    Returns:
    h -- direction with zero trace per cell, HLambda

    Raises:
    ValueError -- when lam < 2 spacing or the balls overlap
    EmptyBall -- when a ball contains no grid point
    """

    _params = context.params

    if lam < 2 * grid.spacing * (1 - 1e-12):
        raise ValueError("Ball radius %.6e is below twice the grid spacing %.6e." % (lam, grid.spacing))

    if band is None or band < 0:
        band = _params.q - 1

    if cache is None:
        cache = {}

    _stack = denseStack(gamma)
    _rho = densityFourier(_stack, context.basis) if _params.alpha != 0 else None

    _centers = [ grid.points[grid.nearest(xi1)], grid.points[grid.nearest(xi2)] ]
    _balls = [ ballIndices(grid, _c, lam) for _c in _centers ]

    for _b, _ball in enumerate(_balls):
        if _ball.shape[0] == 0:
            raise EmptyBall("Ball %d of radius %.6e contains no grid point." % (_b + 1, lam))

    if require_disjoint and numpy.intersect1d(_balls[0], _balls[1]).shape[0] > 0:
        raise ValueError("Balls of radius %.6e overlap." % lam)

    _indices = []
    _weights = []
    _vectors = []

    for _b, (_center, _ball) in enumerate(zip(_centers, _balls)):
        _key = (_b, -1)

        if _key not in cache:
            cache[_key] = phaseFix(bandVector(_center, _stack, context, _rho, band)[:, None])[:, 0]

        _reference = cache[_key]
        _missing = [ _i for _i in _ball if (_b, int(_i)) not in cache ]

        _computed = fiberMap(lambda i: bandVector(grid.points[i], _stack, context, _rho, band, _reference, P.getValue("degeneracy_tol")), _missing)

        for _i, _v in zip(_missing, _computed):
            cache[(_b, int(_i))] = _v

        _indices += [ int(_i) for _i in _ball ]
        _weights += [ (1.0 if _b == 0 else -1.0) * grid.size / _ball.shape[0] ] * _ball.shape[0]
        _vectors += [ cache[(_b, int(_i))] for _i in _ball ]

    return HLambda(
        grid = grid,
        indices = numpy.asarray(_indices),
        weights = numpy.asarray(_weights),
        vectors = numpy.asarray(_vectors),
        count1 = int(_balls[0].shape[0]),
        count2 = int(_balls[1].shape[0]),
        lam = float(lam),
    )


######################
# Quadratic form
######################

def quadraticForm(h: HLambda, context: Context) -> Tuple[float, float, float]:
    """Tr[V_h h] = Hartree(h) - Exchange(h) on the ball grid.

    Exchange = (4 pi/ell^3) N^-2 sum_k sum_ij w(k, xi_j, xi_i) a_i a_j |O_k(i, j)|^2
    with the shifted overlaps O_k(i, j) = sum_m <psi_i(m)|psi_j(m - k)>.

    Returns:
    value -- Hartree - Exchange, float
    hartree -- Hartree part, float
    exchange -- Exchange part, float
    """

    _basis = context.basis
    _grid = h.grid
    _ell3 = _grid.ell ** 3
    _m = _basis.side

    _a = h.weights
    _psi = h.vectors

    # Hartree
    _sum = (_psi.T * _a[None, :]) @ _psi.conj() / _grid.size
    _rho = densityFourier(_sum[None, :, :], _basis)
    _hartree = _ell3 ** 2 * float(numpy.sum(context.g_hat * numpy.abs(_rho.coefficients) ** 2))

    # Exchange
    _points = _grid.points[h.indices]
    _weights = pairWeights(2 * numpy.pi * _basis.shifts / _grid.ell, _points, _points, voxelAverage(_grid.spacing, context.params.subsample))
    _cube = _psi.reshape((_psi.shape[0], _m, _m, _m, _basis.spinor_dim))

    _all = slice(None)
    _exchange = 0.0

    for _s, _k in enumerate(_basis.shifts):
        _dst, _src = _basis.shiftSlices(_k)

        _target = _cube[(_all, ) + _dst + (_all, )].reshape((_psi.shape[0], -1))
        _source = _cube[(_all, ) + _src + (_all, )].reshape((_psi.shape[0], -1))

        if _target.shape[1] == 0:
            continue

        _overlap = _target.conj() @ _source.T

        _exchange += float(numpy.sum(_weights[_s].T * _a[:, None] * _a[None, :] * numpy.abs(_overlap) ** 2))

    _exchange *= (4 * numpy.pi / _ell3) / _grid.size ** 2

    return _hartree - _exchange, _hartree, _exchange


######################
# Functions
######################

def init(logfile: TextIO = sys.stdout, logging_verbosity: int = 1, **kwargs) -> None:
    """Initialize the diagnostic."""
    global LOGFILE, VERBOSITY

    LOGFILE = logfile
    VERBOSITY = logging_verbosity

    P.updateAll(kwargs)


def fineGrid(context: Context) -> BrillouinGrid:
    """Grid of the balls, n_xi_fine or fine_grid_factor times the solver grid."""

    _n = P.getValue("n_xi_fine")

    if _n == 0:
        _n = P.getValue("fine_grid_factor") * context.params.n_xi

    if _n == context.params.n_xi:
        return context.grid

    return gridBuild(context.params.replace(n_xi = _n))


def centersCompute(grid: BrillouinGrid) -> Tuple[numpy.ndarray, numpy.ndarray]:
    """Ball centers of the current parameters, snapped to 'grid'."""

    _default = numpy.full(3, numpy.pi / (2 * grid.ell))

    _xi1 = numpy.asarray(P.getValue("xi1"), dtype = float) if len(P.getValue("xi1")) > 0 else -_default
    _xi2 = numpy.asarray(P.getValue("xi2"), dtype = float) if len(P.getValue("xi2")) > 0 else _default

    return grid.points[grid.nearest(_xi1)], grid.points[grid.nearest(_xi2)]


def overlapRadius(grid: BrillouinGrid, centers: Tuple[numpy.ndarray, numpy.ndarray]) -> float:
    """Smallest radius at which the two balls share a grid point."""

    _d1 = numpy.sqrt(numpy.sum(grid.minimumImage(grid.points - centers[0][None, :]) ** 2, axis = 1))
    _d2 = numpy.sqrt(numpy.sum(grid.minimumImage(grid.points - centers[1][None, :]) ** 2, axis = 1))

    return float(numpy.min(numpy.maximum(_d1, _d2)))


def shellRadii(grid: BrillouinGrid, centers: Tuple[numpy.ndarray, numpy.ndarray], count: int, max_factor: float) -> List[float]:
    """Radii of distinct grid shells around the first center.

    Shells lie in [2 spacing, max_factor spacing] and below the overlap
    radius; at most 'count' of them are picked, spread geometrically.
    """

    _h = grid.spacing
    _limit = min(max_factor * _h * (1 + 1e-9), overlapRadius(grid, centers) * (1 - 1e-9))

    _d2 = numpy.sum(grid.minimumImage(grid.points - centers[0][None, :]) ** 2, axis = 1) / _h ** 2
    _shells = numpy.unique(numpy.round(_d2).astype(int))
    _shells = numpy.sqrt(_shells[_shells >= 4]) * _h
    _shells = _shells[_shells < _limit]

    if _shells.shape[0] <= count:
        return [ float(_s) for _s in _shells ]

    _targets = numpy.geomspace(_shells[0], _shells[-1], count)
    _picked = numpy.unique([ numpy.argmin(numpy.abs(numpy.log(_shells / _t))) for _t in _targets ])

    return [ float(_s) for _s in _shells[_picked] ]


def effectiveRadius(count: int, spacing: float) -> float:
    """Radius of the ball with the volume of 'count' voxels."""
    return float(spacing * (3 * count / (4 * numpy.pi)) ** (1.0 / 3.0))


def radiiCompute(grid: BrillouinGrid, centers: Tuple[numpy.ndarray, numpy.ndarray] = None) -> List[float]:
    """Sorted ball radii of the current parameters.

    Without 'lambda_list' and 'lambda_factors' the radii are the grid
    shells around the first of 'centers' that keep the balls disjoint.

    Raises:
    ValueError -- on fewer than 4 radii or radii below twice the spacing of 'grid'
    """

    _lams = [ float(_l) for _l in P.getValue("lambda_list") ]

    if len(_lams) == 0:
        _lams = [ float(_f) * grid.spacing for _f in P.getValue("lambda_factors") ]

    if len(_lams) == 0 and centers is not None:
        _lams = shellRadii(grid, centers, P.getValue("lambda_count"), P.getValue("lambda_max_factor"))

    _lams = sorted(_lams)

    if len(_lams) < 4:
        raise ValueError("Scaling fit needs at least 4 radii, got %d." % len(_lams))

    if _lams[0] < 2 * grid.spacing * (1 - 1e-12):
        raise ValueError("Radius %.6e is below twice the fine grid spacing %.6e." % (_lams[0], grid.spacing))

    return _lams


def run(context: Context, constants: any, gamma: BlochDensityMatrix, strict: bool = False, **overflown) -> ScalingReport:
    """Evaluates Tr[V_h h] of the two-ball direction over the radii.

    The values are fitted by a + b lambda^-2 (least squares) and by
    a + b' lambda^p (free exponent). b is compared with the oracle
    -2 (4 pi/ell^3) E|x - y|^-2 lambda^2 of two balls.

    Arguments:
    context -- operator context, Context
    constants -- unused, accepted for a uniform plugin interface
    gamma -- state frozen on the solver grid, BlochDensityMatrix
    strict -- fail when b >= 0, the exponent or the oracle check fails, bool, default False
    lambda_list -- radii, list of floats, default [] (lambda_factors)
    lambda_factors -- radii in units of the fine spacing, list of floats, default [] (grid shells)
    fine_grid_factor -- refinement of the solver grid, int, default 1
    n_xi_fine -- explicit ball grid size, int, default 0 (unused)
    xi1, xi2 -- ball centers, 3-lists, default -/+ (pi/2 ell)(1, 1, 1)
    band -- positive band, int, default -1 (q - 1)
    **overflown -- arguments not caught by previous parts

    Returns:
    report -- values, fits and oracle, ScalingReport

    Raises:
    ValueError -- on fewer than 4 radii or radii below twice the fine spacing
    """

    P.updateAll(overflown, reset = False)

    _params = context.params
    _grid = fineGrid(context)
    _ell = _grid.ell

    _xi1, _xi2 = centersCompute(_grid)
    _lams = radiiCompute(_grid, (_xi1, _xi2))

    _stack = gamma.dense() if hasattr(gamma, "dense") else numpy.asarray(gamma)
    _cache = {}

    with FILELOCK:
        if VERBOSITY > 0:
            print ("scaling:grid n_xi:%d spacing:%.12e radii:%d" % (_grid.n_xi, _grid.spacing, len(_lams)), file=LOGFILE)

    _values = []
    _hartree = []
    _exchange = []
    _counts = []

    for _lam in tqdm(_lams, desc = "scaling", leave = False, disable = log.progressDisabled()):
        _h = hLambdaBuild(context, _stack, _xi1, _xi2, _lam, _grid, P.getValue("band"), cache = _cache)
        _value, _hp, _xp = quadraticForm(_h, context)

        _values.append(_value)
        _hartree.append(_hp)
        _exchange.append(_xp)
        _counts.append((_h.count1, _h.count2))

        with FILELOCK:
            if VERBOSITY > 1:
                print ("scaling:lambda:%.12e value:%.12e hartree:%.12e exchange:%.12e balls:%d/%d" % (_lam, _value, _hp, _xp, _h.count1, _h.count2), file=LOGFILE)

    # Discrete balls are fitted by the radius of their volume
    _x = numpy.asarray([ effectiveRadius(0.5 * (_c1 + _c2), _grid.spacing) for _c1, _c2 in _counts ])
    _y = numpy.asarray(_values)

    # a + b lambda^-2
    (_intercept, _coefficient), *_ = numpy.linalg.lstsq(numpy.stack([numpy.ones_like(_x), _x ** -2], axis = 1), _y, rcond = None)

    # a + b' (lambda/h)^p with a of the previous fit, free exponent
    _exponent = None
    _exponent_coefficient = None

    try:
        _u = _x / _grid.spacing
        _popt, _ = curve_fit(
            lambda u, b, p: _intercept + b * u ** p, _u, _y,
            p0 = (_coefficient / _grid.spacing ** 2, -2.0),
            maxfev = 20000
        )
        _exponent = float(_popt[1])
        _exponent_coefficient = float(_popt[0] * _grid.spacing ** -_popt[1])
    except (RuntimeError, ValueError) as e:
        with FILELOCK:
            if VERBOSITY > 0:
                print ("scaling:exponent_fit_failed %s" % str(e), file=LOGFILE)

    _oracle = oracleCoefficient(_ell)

    _report = ScalingReport(
        lam = _lams,
        lam_effective = [ float(_l) for _l in _x ],
        values = _values,
        hartree = _hartree,
        exchange = _exchange,
        counts = _counts,
        spacing = _grid.spacing,
        intercept = float(_intercept),
        coefficient = float(_coefficient),
        exponent = _exponent,
        exponent_coefficient = _exponent_coefficient,
        oracle_coefficient = _oracle,
        oracle_values = [ float(_intercept + _oracle / _l ** 2) for _l in _x ],
        pair_average = ballPairAverage(),
    )

    _report.properties["coefficient_negative"] = _report.coefficient < 0
    _report.properties["exponent_near_minus_two"] = _exponent is not None and abs(_exponent + 2) <= P.getValue("exponent_tol")
    _report.properties["coefficient_near_oracle"] = abs(_report.coefficient - _oracle) <= P.getValue("oracle_tol") * abs(_oracle)

    with FILELOCK:
        if VERBOSITY > 0:
            print ("scaling:fit intercept:%.12e coefficient:%.12e exponent:%s oracle:%.12e" % (_report.intercept, _report.coefficient, _exponent, _oracle), file=LOGFILE)

    if strict and not all(_report.properties.values()):
        raise PropertyViolated("Scaling properties failed: %s" % ", ".join([ _k for _k, _v in _report.properties.items() if not _v ]))

    return _report
