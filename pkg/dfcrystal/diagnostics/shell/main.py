#!/usr/bin/env python3
# main.py
"""Classification of the last occupied shell."""
######################
# Imports & Globals
######################

import numpy, sys

from dataclasses import dataclass, field

from dfcrystal.errors import PropertyViolated
from dfcrystal.operators import Context, SpectralDecomp, meanField, spectraCompute, fiberMap
from dfcrystal.states import BlochDensityMatrix
from dfcrystal.solver import aufbauFill

# Thread lock for log file
from threading import Lock

# Typing
from typing import Dict, List, Optional, TextIO, Tuple


# Global variables
LOGFILE = sys.stdout
VERBOSITY = 1
FILELOCK = Lock()


# Parameters
from dfcrystal.parameter import *
P = ParameterList()
P.createAdd("projector_tol", 1e-8, float, "Largest ||gamma^2 - gamma|| of a fiber accepted as a projector.", "run", bounds=(0.0, 1.0))


######################
# Types
######################

@dataclass
class ShellReport:
    """Fermi level, gaps around it and the occupations of its band."""

    classification: str
    nu: float
    gap_below: Optional[float]
    gap_above: Optional[float]
    fractional_weight: float
    mixed_integer: bool
    band: List[Dict[str, float]]
    projector_deviation: List[float]
    projector: bool
    properties: Dict[str, bool] = field(default_factory = dict)


    def header(self) -> List[str]:
        return ["fiber", "index", "eigenvalue", "occupation"]


    def rows(self) -> List[List[any]]:
        """CSV rows (fiber, index, eigenvalue, occupation)."""
        return [ [_b["fiber"], _b["index"], _b["eigenvalue"], _b["occupation"]] for _b in self.band ]


    def dict(self) -> Dict[str, any]:
        return {
            "classification": self.classification,
            "nu": self.nu,
            "gap_below": self.gap_below,
            "gap_above": self.gap_above,
            "fractional_weight": self.fractional_weight,
            "mixed_integer": self.mixed_integer,
            "band": self.band,
            "projector_deviation": self.projector_deviation,
            "projector": self.projector,
            "properties": dict(self.properties),
        }


######################
# Utilities
######################

def projectorDeviation(gamma: BlochDensityMatrix) -> List[float]:
    """Per fiber ||gamma^2 - gamma|| = max f (1 - f) over the occupations."""
    return [ float(numpy.max(_f * (1 - _f), initial = 0.0)) for _f in gamma.occupations ]


def bandOccupations(gamma: BlochDensityMatrix, spectra: List[SpectralDecomp], nu: float, tol: float) -> List[Dict[str, float]]:
    """Occupations <psi|gamma|psi> of the eigenvectors within 'tol' of nu."""

    def _fiber(index: int) -> List[Dict[str, float]]:
        _s = spectra[index]
        _in = numpy.nonzero(_s.positive & (numpy.abs(_s.eigenvalues - nu) <= tol))[0]

        if _in.shape[0] == 0:
            return []

        _band = _s.eigenvectors[:, _in]
        _projected = _band.conj().T @ gamma.orbitals[index]

        _occupations = numpy.real(numpy.sum(numpy.abs(_projected) ** 2 * gamma.occupations[index][None, :], axis = 1))

        return [
            {"fiber": index, "index": int(_j), "eigenvalue": float(_s.eigenvalues[_j]), "occupation": float(_o)}
            for _j, _o in zip(_in, _occupations)
        ]

    return [ _row for _rows in fiberMap(_fiber, range(len(spectra))) for _row in _rows ]


def gapsCompute(spectra: List[SpectralDecomp], nu: float, tol: float) -> Tuple[Optional[float], Optional[float]]:
    """Distance of nu to the closest positive eigenvalues outside of the band."""

    _values = numpy.concatenate([ _s.eigenvalues[_s.positive] for _s in spectra ])

    _below = _values[_values < nu - tol]
    _above = _values[_values > nu + tol]

    return (
        float(nu - numpy.max(_below)) if _below.shape[0] > 0 else None,
        float(numpy.min(_above) - nu) if _above.shape[0] > 0 else None,
    )


######################
# Functions
######################

def init(logfile: TextIO = sys.stdout, logging_verbosity: int = 1, **kwargs) -> None:
    """Initialize the diagnostic."""
    global LOGFILE, VERBOSITY

    LOGFILE = logfile
    VERBOSITY = logging_verbosity

    P.updateAll(kwargs)


def run(context: Context, constants: any, gamma: BlochDensityMatrix, nu: float = None, strict: bool = False, **overflown) -> ShellReport:
    """Classifies the Fermi band of 'gamma'.

    The band holds the positive eigenvectors of D_gamma within tie_tol
    of nu. The fractional weight is the grid average of min(f, 1 - f)
    over their occupations f.

    Arguments:
    context -- operator context, Context
    constants -- unused, accepted for a uniform plugin interface
    gamma -- converged state, BlochDensityMatrix
    nu -- Fermi level, float, default None (aufbau on D_gamma)
    strict -- fail when the band is fractional or gamma is no projector, bool, default False
    projector_tol -- projector tolerance, float, default 1e-8
    **overflown -- arguments not caught by previous parts

    Returns:
    report -- classification and band table, ShellReport
    """

    P.updateAll(overflown, reset = False)

    _params = context.params
    _tol = _params.tie_tol

    _spectra = spectraCompute(meanField(gamma, context))

    if nu is None:
        nu = aufbauFill(_spectra, _params.q, context.grid, _params, allow_partial = True).nu

    _band = bandOccupations(gamma, _spectra, nu, _tol)
    _occupations = numpy.asarray([ _b["occupation"] for _b in _band ])

    _fractional = float(numpy.sum(numpy.minimum(_occupations, 1 - _occupations).clip(0.0)) / context.grid.size)

    _full = _occupations >= 1 - _params.occupation_tol
    _empty = _occupations <= _params.occupation_tol

    if _fractional > _params.occupation_tol:
        _classification = "fractional"
    elif numpy.any(_full):
        _classification = "filled"
    else:
        _classification = "empty"

    _gap_below, _gap_above = gapsCompute(_spectra, nu, _tol)
    _deviation = projectorDeviation(gamma)
    _projector = bool(max(_deviation, default = 0.0) <= P.getValue("projector_tol"))

    _report = ShellReport(
        classification = _classification,
        nu = float(nu),
        gap_below = _gap_below,
        gap_above = _gap_above,
        fractional_weight = _fractional,
        mixed_integer = bool(numpy.any(_full) and numpy.any(_empty)),
        band = _band,
        projector_deviation = _deviation,
        projector = _projector,
    )

    _report.properties["not_fractional"] = _classification != "fractional"
    _report.properties["projector"] = _projector

    with FILELOCK:
        if VERBOSITY > 0:
            print ("shell:%s nu:%.12e fractional:%.6e projector:%s" % (_classification, nu, _fractional, _projector), file=LOGFILE)
        if VERBOSITY > 2:
            for _b in _band:
                print ("shell:band fiber:%d index:%d eigenvalue:%.12e occupation:%.12e" % (_b["fiber"], _b["index"], _b["eigenvalue"], _b["occupation"]), file=LOGFILE)

    if strict and not all(_report.properties.values()):
        raise PropertyViolated("Shell properties failed: %s" % ", ".join([ _k for _k, _v in _report.properties.items() if not _v ]))

    return _report
