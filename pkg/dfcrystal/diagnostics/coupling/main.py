#!/usr/bin/env python3
# main.py
"""Computable branch of the critical coupling."""
######################
# Imports & Globals
######################

import sys

from dataclasses import dataclass, field

from dfcrystal.errors import PropertyViolated
from dfcrystal.constants import ConstantsEstimate

# Thread lock for log file
from threading import Lock

# Typing
from typing import Dict, List, TextIO


# Global variables
LOGFILE = sys.stdout
VERBOSITY = 1
FILELOCK = Lock()

NOT_COMPUTED = "not-computed: depends on proof constants without a numeric recipe"


# Parameters
from dfcrystal.parameter import *
P = ParameterList()


######################
# Types
######################

@dataclass
class CouplingReport:
    """Critical constant, the implied threshold on alpha/c and its clause."""

    C_EE: float
    R: float
    C_cri: float
    threshold: float
    alpha_c: float
    holds: bool
    slack: float
    C_cri_prime: str = NOT_COMPUTED
    properties: Dict[str, bool] = field(default_factory = dict)


    def header(self) -> List[str]:
        return ["name", "value"]


    def rows(self) -> List[List[any]]:
        """CSV rows (name, value)."""
        return [ [_k, _v] for _k, _v in self.dict().items() if not isinstance(_v, dict) ]


    def dict(self) -> Dict[str, any]:
        return {
            "C_EE": self.C_EE,
            "R": self.R,
            "C_cri": self.C_cri,
            "threshold": self.threshold,
            "alpha_c": self.alpha_c,
            "holds": self.holds,
            "slack": self.slack,
            "C_cri_prime": self.C_cri_prime,
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


def run(context: any, constants: ConstantsEstimate, gamma: any = None, strict: bool = False, **overflown) -> CouplingReport:
    """Reports C_cri = 16 pi C_EE R and the clause alpha_c < 4 pi / C_cri.

    Arguments:
    context -- unused, accepted for a uniform plugin interface
    constants -- estimated constants, ConstantsEstimate
    gamma -- unused, accepted for a uniform plugin interface
    strict -- fail when the clause does not hold, bool, default False
    **overflown -- arguments not caught by previous parts

    Returns:
    report -- computable branch and clause, CouplingReport

    Note: The threshold is a partial one, the full critical constant
    is the maximum with the branch that is not computed.
    """

    P.updateAll(overflown, reset = False)

    _params = constants.params

    _threshold = constants.alpha_c_threshold
    _slack = float(_threshold - _params.alpha_c)

    _report = CouplingReport(
        C_EE = constants.C_EE,
        R = constants.R,
        C_cri = constants.C_cri,
        threshold = _threshold,
        alpha_c = _params.alpha_c,
        holds = bool(_params.alpha_c < _threshold or _params.alpha_c == 0),
        slack = _slack,
    )

    _report.properties["coupling_below_threshold"] = _report.holds

    with FILELOCK:
        if VERBOSITY > 0:
            print ("coupling:C_cri:%.12e threshold:%.12e alpha_c:%.12e holds:%s slack:%.12e" % (_report.C_cri, _threshold, _params.alpha_c, _report.holds, _slack), file=LOGFILE)

    if strict and not _report.holds:
        raise PropertyViolated("alpha/c = %.6e is not below 4 pi / C_cri = %.6e." % (_params.alpha_c, _threshold))

    return _report
