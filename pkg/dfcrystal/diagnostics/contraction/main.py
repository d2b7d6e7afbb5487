#!/usr/bin/env python3
# main.py
"""Step ratios of theta against the contraction rate."""
######################
# Imports & Globals
######################

import sys

from dataclasses import dataclass, field

from dfcrystal.errors import PropertyViolated
from dfcrystal.operators import Context
from dfcrystal.states import BlochDensityMatrix
from dfcrystal.constants import ConstantsEstimate
from dfcrystal.retraction import RetractionTrace, theta, stepNorms, membershipCheck, projectorDifferenceBound, gammaPlusDeviation
from dfcrystal.solver import initialGuess

# Thread lock for log file
from threading import Lock

# Typing
from typing import Dict, List, Optional, TextIO


# Global variables
LOGFILE = sys.stdout
VERBOSITY = 1
FILELOCK = Lock()


# Parameters
from dfcrystal.parameter import *
P = ParameterList()
P.createAdd("start", "free-fill", str, "Starting point of theta: 'free-fill', 'atomic-guess' or 'checkpoint'.", "run", choices=["free-fill", "atomic-guess", "checkpoint"])
P.createAdd("ratio_slack", 1e-3, float, "Relative slack of the ratio bound L.", "run", bounds=(0.0, 1.0))


######################
# Types
######################

@dataclass
class ContractionReport:
    """Trace of theta with the checks made on its result."""

    trace: RetractionTrace
    max_ratio: float
    L: float
    start_margin: Optional[float]
    idempotence: float
    gamma_plus_deviation: float
    projector_lhs: float
    projector_rhs: float
    properties: Dict[str, bool] = field(default_factory = dict)


    def header(self) -> List[str]:
        return ["iteration", "step_norm_Xc", "step_norm_Yc", "ratio", "margin"]


    def rows(self) -> List[List[any]]:
        return self.trace.rows()


    def dict(self) -> Dict[str, any]:
        return {
            "iterations": self.trace.iterations,
            "productive": self.trace.productive,
            "converged": self.trace.converged,
            "monotone": self.trace.monotone,
            "records": self.trace.records,
            "max_ratio": self.max_ratio,
            "L": self.L,
            "start_margin": self.start_margin,
            "idempotence": self.idempotence,
            "gamma_plus_deviation": self.gamma_plus_deviation,
            "projector_lhs": self.projector_lhs,
            "projector_rhs": self.projector_rhs,
            "properties": dict(self.properties),
        }


######################
# Functions
######################

def init(logfile: TextIO = sys.stdout, logging_verbosity: int = 1, **kwargs) -> None:
    """Initialize the diagnostic."""
    global LOGFILE, VERBOSITY

    LOGFILE = logfile
    VERBOSITY = logging_verbosity

    P.updateAll(kwargs)


def run(context: Context, constants: ConstantsEstimate, gamma: BlochDensityMatrix = None, strict: bool = False, **overflown) -> ContractionReport:
    """Runs theta and checks its contraction.

    Properties:
    ratios_below_one -- every ratio after the first is < 1
    ratio_within_L -- max ratio <= L (1 + ratio_slack)
    idempotent -- ||theta(theta(g)) - theta(g)|| <= 5 retraction_tol
    in_gamma_plus -- ||P- theta(g) P-||_X <= 10 retraction_tol

    Arguments:
    context -- operator context, Context
    constants -- estimated (or overridden) constants, ConstantsEstimate
    gamma -- starting point for start = 'checkpoint', BlochDensityMatrix, default None
    strict -- fail on a failed property, bool, default False
    start -- starting point, str, default 'free-fill'
    ratio_slack -- relative slack of L, float, default 1e-3
    **overflown -- arguments not caught by previous parts

    Returns:
    report -- trace and checks, ContractionReport
    """

    P.updateAll(overflown, reset = False)

    _params = context.params

    _start = initialGuess(context, P.getValue("start"), gamma)
    _margin = membershipCheck(_start, context, constants).margin if constants is not None else None

    _retracted, _trace = theta(_start, context, constants, strict = strict)
    _again, _ = theta(_retracted, context, constants)

    _idempotence = max(stepNorms(_again, _retracted, context))
    _deviation = gammaPlusDeviation(_retracted, context)
    _lhs, _rhs = projectorDifferenceBound(_start, _retracted, context, constants)

    _ratios = [ _r["ratio"] for _r in _trace.records[1:] if _r["ratio"] is not None ]
    _L = constants.L

    _report = ContractionReport(
        trace = _trace,
        max_ratio = _trace.max_ratio,
        L = _L,
        start_margin = _margin,
        idempotence = _idempotence,
        gamma_plus_deviation = _deviation,
        projector_lhs = _lhs,
        projector_rhs = _rhs,
    )

    _report.properties["ratios_below_one"] = all([ _r < 1 for _r in _ratios ])
    _report.properties["ratio_within_L"] = _trace.max_ratio <= _L * (1 + P.getValue("ratio_slack"))
    _report.properties["idempotent"] = _idempotence <= 5 * _params.retraction_tol
    _report.properties["in_gamma_plus"] = _deviation <= 10 * _params.retraction_tol

    with FILELOCK:
        if VERBOSITY > 0:
            print ("contraction:iterations:%d max_ratio:%.12e L:%.12e idempotence:%.6e gamma_plus:%.6e" % (_trace.iterations, _trace.max_ratio, _L, _idempotence, _deviation), file=LOGFILE)
            print ("contraction:projector lhs:%.12e rhs:%.12e" % (_lhs, _rhs), file=LOGFILE)
        if VERBOSITY > 1:
            for _r in _trace.records:
                print ("contraction:%d step_Xc:%.12e step_Yc:%.12e ratio:%s" % (_r["iteration"], _r["step_norm_Xc"], _r["step_norm_Yc"], _r["ratio"]), file=LOGFILE)

    if strict and not all(_report.properties.values()):
        raise PropertyViolated("Contraction properties failed: %s" % ", ".join([ _k for _k, _v in _report.properties.items() if not _v ]))

    return _report
