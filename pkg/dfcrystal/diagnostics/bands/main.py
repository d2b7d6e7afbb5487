#!/usr/bin/env python3
# main.py
"""Positive bands of the frozen mean-field operator along a path."""
######################
# Imports & Globals
######################

import numpy, sys

from scipy.linalg import eigvalsh

from tqdm import tqdm

from dataclasses import dataclass, field

from dfcrystal.errors import PropertyViolated
from dfcrystal.operators import Context, denseStack, densityFourier, meanFieldAt, fiberMap
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

# Hoelder exponents of the reported moduli
EXPONENTS = [0.5, 0.9, 1.0]


# Parameters
from dfcrystal.parameter import *
P = ParameterList()
P.createAdd("path", [], list, "Vertices of the path in units of pi/ell, empty selects G-X-M-G.", "run")
P.createAdd("samples", 100, int, "Number of points sampled along the whole path.", "run", bounds=(2, 100000))
P.createAdd("n_bands", 0, int, "Number of positive bands, 0 selects 2 q.", "run", bounds=(0, 10**6))
P.createAdd("jump_factor", 10.0, float, "Steps steeper than this times the median slope are flagged.", "run", bounds=(1.0, float("inf")))


######################
# Types
######################

@dataclass
class ContinuityReport:
    """Bands along the path with their moduli and flagged steps."""

    points: numpy.ndarray = field(repr = False)
    distance: numpy.ndarray = field(repr = False)
    bands: numpy.ndarray = field(repr = False)
    moduli: Dict[float, List[float]]
    flagged: List[Dict[str, float]]
    analytic_deviation: Optional[float] = None
    analytic_moduli: Optional[Dict[float, List[float]]] = None
    lipschitz_bound: Optional[float] = None
    properties: Dict[str, bool] = field(default_factory = dict)


    def rows(self) -> List[List[float]]:
        """CSV rows (distance, xi_x, xi_y, xi_z, band_0, ...)."""
        return [ [float(_d)] + _p.tolist() + _b.tolist() for _d, _p, _b in zip(self.distance, self.points, self.bands) ]


    def header(self) -> List[str]:
        return ["distance", "xi_x", "xi_y", "xi_z"] + [ "band_%d" % _i for _i in range(self.bands.shape[1]) ]


    def dict(self) -> Dict[str, any]:
        return {
            "samples": int(self.points.shape[0]),
            "n_bands": int(self.bands.shape[1]),
            "moduli": { str(_p): _m for _p, _m in self.moduli.items() },
            "flagged": self.flagged,
            "analytic_deviation": self.analytic_deviation,
            "analytic_moduli": { str(_p): _m for _p, _m in self.analytic_moduli.items() } if self.analytic_moduli is not None else None,
            "lipschitz_bound": self.lipschitz_bound,
            "properties": dict(self.properties),
        }


######################
# Utilities
######################

def pathSample(vertices: numpy.ndarray, samples: int) -> Tuple[numpy.ndarray, numpy.ndarray]:
    """Equidistant points along a polyline, both end points included.

    Returns:
    points -- samples x 3 numpy.ndarray
    distance -- arc length of every point, samples numpy.ndarray
    """

    _segments = numpy.linalg.norm(numpy.diff(vertices, axis = 0), axis = 1)
    _cumulative = numpy.concatenate([[0.0], numpy.cumsum(_segments)])

    _distance = numpy.linspace(0.0, _cumulative[-1], samples)

    _points = numpy.stack([ numpy.interp(_distance, _cumulative, vertices[:, _j]) for _j in range(3) ], axis = 1)

    return _points, _distance


def moduliCompute(bands: numpy.ndarray, points: numpy.ndarray) -> Dict[float, List[float]]:
    """Per band max |d lambda| / |d xi|^p over consecutive samples."""

    _step = numpy.linalg.norm(numpy.diff(points, axis = 0), axis = 1)
    _change = numpy.abs(numpy.diff(bands, axis = 0))
    _valid = _step > 0

    return {
        _p: [ float(numpy.max(_change[_valid, _b] / _step[_valid] ** _p, initial = 0.0)) for _b in range(bands.shape[1]) ]
        for _p in EXPONENTS
    }


def jumpsFlag(bands: numpy.ndarray, points: numpy.ndarray, factor: float, floor: float) -> List[Dict[str, float]]:
    """Steps whose slope exceeds 'factor' times the median slope of the band."""

    _step = numpy.linalg.norm(numpy.diff(points, axis = 0), axis = 1)
    _change = numpy.abs(numpy.diff(bands, axis = 0))
    _valid = _step > 0

    _flagged = []

    for _b in range(bands.shape[1]):
        _slope = numpy.zeros(_step.shape)
        _slope[_valid] = _change[_valid, _b] / _step[_valid]

        _nonzero = _slope[_slope > 0]

        if _nonzero.shape[0] == 0:
            continue

        _median = float(numpy.median(_nonzero))

        for _i in numpy.nonzero((_slope > factor * _median) & (_change[:, _b] > floor))[0]:
            _flagged.append({"band": _b, "step": int(_i), "slope": float(_slope[_i]), "median": _median})

    return _flagged


def dispersionBands(points: numpy.ndarray, context: Context, n_bands: int) -> numpy.ndarray:
    """Lowest positive values of sqrt(c^4 + c^2 |xi + 2 pi k/ell|^2), twice each."""

    _c = context.params.c

    return numpy.asarray([
        numpy.sort(numpy.repeat(numpy.sqrt(_c ** 4 + _c ** 2 * numpy.sum(context.basis.momenta(_xi) ** 2, axis = 1)), 2))[:n_bands]
        for _xi in points
    ])


######################
# Functions
######################

def init(logfile: TextIO = sys.stdout, logging_verbosity: int = 1, **kwargs) -> None:
    """Initialize the diagnostic."""
    global LOGFILE, VERBOSITY

    LOGFILE = logfile
    VERBOSITY = logging_verbosity

    P.updateAll(kwargs)


def run(context: Context, constants: any, gamma: BlochDensityMatrix, strict: bool = False, **overflown) -> ContinuityReport:
    """Samples the positive bands of D_{gamma,xi} along a path.

    Arguments:
    context -- operator context, Context
    constants -- unused, accepted for a uniform plugin interface
    gamma -- state frozen on the solver grid, BlochDensityMatrix
    strict -- fail on flagged steps (and on analytic mismatch at alpha = z = 0), bool, default False
    path -- vertices in units of pi/ell, list of 3-lists, default [] (G-X-M-G)
    samples -- number of sampled points, int, default 100
    n_bands -- number of positive bands, int, default 0 (2 q)
    jump_factor -- flagging factor, float, default 10
    **overflown -- arguments not caught by previous parts

    Returns:
    report -- bands, moduli and flags, ContinuityReport
    """

    P.updateAll(overflown, reset = False)

    _params = context.params
    _ell = context.grid.ell

    _vertices = P.getValue("path")

    if len(_vertices) == 0:
        _vertices = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 0, 0]]

    _vertices = numpy.asarray(_vertices, dtype = float) * numpy.pi / _ell

    if _vertices.ndim != 2 or _vertices.shape[1] != 3 or _vertices.shape[0] < 2:
        raise ValueError("Parameter 'path' has to be a list of at least two 3-lists.")

    if numpy.any(numpy.abs(_vertices) > numpy.pi / _ell * (1 + 1e-12)):
        raise ValueError("Path leaves the reciprocal cell.")

    _points, _distance = pathSample(_vertices, P.getValue("samples"))

    _n_positive = _params.n_b // 2
    _n_bands = P.getValue("n_bands") if P.getValue("n_bands") > 0 else 2 * _params.q
    _n_bands = min(_n_bands, _n_positive)

    _stack = denseStack(gamma)
    _rho = densityFourier(_stack, context.basis) if _params.alpha != 0 else None


    def _sample(xi: numpy.ndarray) -> numpy.ndarray:
        _values = eigvalsh(meanFieldAt(xi, _stack, context, _rho))
        return _values[_values > 0][:_n_bands]


    _bands = numpy.asarray(fiberMap(_sample, tqdm(_points, desc = "bands", leave = False, disable = log.progressDisabled())))

    _report = ContinuityReport(
        points = _points,
        distance = _distance,
        bands = _bands,
        moduli = moduliCompute(_bands, _points),
        flagged = jumpsFlag(_bands, _points, P.getValue("jump_factor"), 1e-8 * _params.c ** 2),
    )

    _report.properties["no_flagged_jumps"] = len(_report.flagged) == 0

    if _params.alpha == 0 and _params.z == 0:
        _analytic = dispersionBands(_points, context, _n_bands)

        _report.analytic_deviation = float(numpy.max(numpy.abs(_bands - _analytic)))
        _report.analytic_moduli = moduliCompute(_analytic, _points)
        _report.lipschitz_bound = _params.c

        _report.properties["analytic_match"] = _report.analytic_deviation <= 1e-10 * max(1.0, _params.c ** 2)
        _report.properties["lipschitz_within_c"] = max(_report.moduli[1.0]) <= _params.c * (1 + 1e-9)
        _report.properties["modulus_matches_analytic"] = all([
            abs(_m - _a) <= 0.05 * _a + 1e-12 * _params.c for _m, _a in zip(_report.moduli[1.0], _report.analytic_moduli[1.0])
        ])

    with FILELOCK:
        if VERBOSITY > 0:
            print ("bands:samples:%d bands:%d flagged:%d" % (_points.shape[0], _n_bands, len(_report.flagged)), file=LOGFILE)
            for _p, _m in _report.moduli.items():
                print ("bands:modulus p:%.2f max:%.12e" % (_p, max(_m)), file=LOGFILE)
        if VERBOSITY > 2:
            for _f in _report.flagged:
                print ("bands:flag band:%d step:%d slope:%.6e median:%.6e" % (_f["band"], _f["step"], _f["slope"], _f["median"]), file=LOGFILE)

    if strict and not all(_report.properties.values()):
        raise PropertyViolated("Band properties failed: %s" % ", ".join([ _k for _k, _v in _report.properties.items() if not _v ]))

    return _report
