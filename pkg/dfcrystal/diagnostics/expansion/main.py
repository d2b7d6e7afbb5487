#!/usr/bin/env python3
# main.py
"""Expansion check of the penalized energy along a direction."""
######################
# Imports & Globals
######################

import numpy, sys

from scipy.linalg import svdvals

from tqdm import tqdm

from dataclasses import dataclass, field

from dfcrystal.errors import HypothesisViolated, InvalidState, PropertyViolated
from dfcrystal.operators import Context, meanField, spectraCompute, fiberMap
from dfcrystal.states import BlochDensityMatrix, energyCompute, normsCompute, convolutionNorms
from dfcrystal.states import directionalLinear, exchangeBilinear, tracePerCell
from dfcrystal.constants import ConstantsEstimate
from dfcrystal.retraction import theta, membershipCheck
from dfcrystal.solver import penalizationEpsilon, aufbauFill

import dfcrystal.log as log

# Thread lock for log file
from threading import Lock

# Typing
from typing import Dict, List, Optional, TextIO, Tuple


# Global variables
LOGFILE = sys.stdout
VERBOSITY = 1
FILELOCK = Lock()

# Tolerance of the P+ h P+ = h hypothesis
HYPOTHESIS_TOL = 1e-10


# Parameters
from dfcrystal.parameter import *
P = ParameterList()
P.createAdd("t_list", [1e-1, 1e-2, 1e-3, 1e-4], list, "Positive step sizes t of gamma + t h.", "run")
P.createAdd("direction", "transfer", str, "Direction h: 'transfer' (highest filled to lowest empty orbital) or 'zero'.", "run", choices=["transfer", "zero"])
P.createAdd("negative_t", True, bool, "Evaluate -t as well when gamma - t h stays admissible.", "run")
P.createAdd("slope_min", 1.9, float, "Smallest accepted log-log slope of |residual| against t.", "run", bounds=(0.0, 10.0))


######################
# Types
######################

@dataclass
class ExpansionReport:
    """Measured energy against its second order model."""

    t: List[float]
    measured: List[float]
    model: List[float]
    residual: List[float]
    err: List[Optional[float]]
    bound: List[float]
    admissible: List[bool]
    membership_margin: List[Optional[float]]
    base_energy: float
    linear: float
    quadratic: float
    eps_P: float
    slope: Optional[float] = None
    even_odd: List[Dict[str, float]] = field(default_factory = list)
    properties: Dict[str, bool] = field(default_factory = dict)


    def header(self) -> List[str]:
        return ["t", "measured", "model", "residual", "err", "bound"]


    def rows(self) -> List[List[any]]:
        """CSV rows (t, measured, model, residual, err, bound)."""
        return [
            [_t, _m, _o, _r, _e, _b]
            for _t, _m, _o, _r, _e, _b, _a in zip(self.t, self.measured, self.model, self.residual, self.err, self.bound, self.admissible)
            if _a
        ]


    def dict(self) -> Dict[str, any]:
        return {
            "t": self.t,
            "measured": self.measured,
            "model": self.model,
            "residual": self.residual,
            "err": self.err,
            "bound": self.bound,
            "admissible": self.admissible,
            "membership_margin": self.membership_margin,
            "base_energy": self.base_energy,
            "linear": self.linear,
            "quadratic": self.quadratic,
            "eps_P": self.eps_P,
            "slope": self.slope,
            "even_odd": self.even_odd,
            "properties": dict(self.properties),
        }


######################
# Utilities
######################

def transferDirection(gamma: BlochDensityMatrix, context: Context, spectra: list = None) -> numpy.ndarray:
    """Moves one orbital of occupation to the lowest empty level.

    h = |u><u| (fiber of u) - |v><v| (fiber of v), where v is the highest
    filled and u the lowest empty positive eigenvector of D_gamma.
    Both are positive eigenvectors, so P+ h P+ = h.

    Returns:
    h -- direction with zero trace per cell, N x n_b x n_b numpy.ndarray

    Raises:
    HypothesisViolated -- when D_gamma has no empty positive level
    """

    _params = context.params

    if spectra is None:
        spectra = spectraCompute(meanField(gamma, context))

    _filling = aufbauFill(spectra, _params.q, context.grid, _params, allow_partial = True)

    _filled = []
    _empty = []

    for _i, (_s, _f) in enumerate(zip(spectra, _filling.occupations)):
        for _j in numpy.nonzero(_s.positive)[0]:
            (_filled if _f[_j] > 0 else _empty).append((float(_s.eigenvalues[_j]), _i, int(_j)))

    if len(_empty) == 0 or len(_filled) == 0:
        raise HypothesisViolated("No pair of filled and empty positive levels to build the transfer direction.")

    _, _fv, _iv = max(_filled)
    _, _fu, _iu = min(_empty)

    _h = numpy.zeros((context.grid.size, gamma.n_b, gamma.n_b), dtype = complex)

    _u = spectra[_fu].eigenvectors[:, _iu]
    _v = spectra[_fv].eigenvectors[:, _iv]

    _h[_fu] += numpy.outer(_u, _u.conj())
    _h[_fv] -= numpy.outer(_v, _v.conj())

    with FILELOCK:
        if VERBOSITY > 1:
            print ("expansion:transfer from:%d/%d to:%d/%d" % (_fv, _iv, _fu, _iu), file=LOGFILE)

    return _h


def hypothesisCheck(h: numpy.ndarray, spectra: list, context: Context) -> float:
    """Largest entry of P+ h P+ - h over all fibers.

    Raises:
    HypothesisViolated -- when it exceeds 1e-10
    """

    _deviation = 0.0

    for _i, _s in enumerate(spectra):
        _v = _s.eigenvectors[:, _s.positive]
        _p = _v @ _v.conj().T

        _deviation = max(_deviation, float(numpy.max(numpy.abs(_p @ h[_i] @ _p - h[_i]), initial = 0.0)))

    if _deviation > HYPOTHESIS_TOL:
        raise HypothesisViolated("P+ h P+ differs from h by %.6e." % _deviation)

    return _deviation


def errorNorm(stack: numpy.ndarray, h_fiber: numpy.ndarray, context: Context, constants: ConstantsEstimate) -> float:
    """Size N of the direction h at the state 'stack'.

    N = C_EE^2 / (2 (1 - kappa)^2 lambda0) avg ||h||_xi^2 ||gamma_xi||_S1
        + ((q + R) alpha_c^2 + alpha_c) 10 C_EE^4 / ((1 - kappa)^4 lambda0^5/2 (1 - L)^2)
          (avg ||h||_xi ||gamma_xi |D_xi|^1/2||_S1 / c + max_xi conv(||h||)_xi / c)^2

    where ||h||_xi = max(||h||_X, ||h||_Y(xi)).

    Arguments:
    stack -- state gamma + t h, N x n_b x n_b numpy.ndarray
    h_fiber -- per fiber norms ||h||_xi, N numpy.ndarray
    context -- operator context, Context
    constants -- estimated constants, ConstantsEstimate

    Returns:
    N -- value, float (inf outside of the contraction regime)
    """

    _p = context.params
    _k = constants

    if _k.kappa >= 1 or _k.lambda0 <= 0 or _k.L >= 1 or not numpy.isfinite(_k.R):
        return float("inf")

    _trace_norm = numpy.asarray(fiberMap(lambda i: float(numpy.sum(svdvals(stack[i]))), range(stack.shape[0])))
    _dirac_norm = numpy.asarray(fiberMap(lambda i: float(numpy.sum(svdvals(stack[i] * context.dirac_root[i][None, :]))), range(stack.shape[0])))

    _first = _k.C_EE ** 2 / (2 * (1 - _k.kappa) ** 2 * _k.lambda0) * float(numpy.mean(h_fiber ** 2 * _trace_norm))

    _inner = float(numpy.mean(h_fiber * _dirac_norm)) / _p.c + float(numpy.max(convolutionNorms(h_fiber, context))) / _p.c

    _prefactor = (_p.q * _p.alpha_c ** 2 + _k.R * _p.alpha_c ** 2 + _p.alpha_c) \
        * 10 * _k.C_EE ** 4 / ((1 - _k.kappa) ** 4 * _k.lambda0 ** 2.5 * (1 - _k.L) ** 2)

    return _first + _prefactor * _inner ** 2


def errWithinBound(report: ExpansionReport) -> bool:
    """|Err(t)| <= N at every admissible t with a defined Err."""
    return all([
        abs(_e) <= _b
        for _a, _e, _b in zip(report.admissible, report.err, report.bound)
        if _a and _e is not None
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


def run(context: Context, constants: ConstantsEstimate, gamma: BlochDensityMatrix, h: numpy.ndarray = None, strict: bool = False, **overflown) -> ExpansionReport:
    """Evaluates E(gamma + t h) against its second order model.

    E is the penalized energy of the retracted state,
    E(x) = energy(theta(x)) - eps_P Tr theta(x) + eps_P q.

    Arguments:
    context -- operator context, Context
    constants -- estimated constants, ConstantsEstimate
    gamma -- solved state in Gamma+, BlochDensityMatrix
    h -- direction, N x n_b x n_b numpy.ndarray, default None (given by 'direction')
    strict -- assert U_R membership, the slope and the error bound, bool, default False
    t_list -- positive step sizes, list of floats, default [1e-1, 1e-2, 1e-3, 1e-4]
    direction -- 'transfer' or 'zero', str, default 'transfer'
    negative_t -- evaluate -t when admissible, bool, default True
    slope_min -- smallest accepted slope, float, default 1.9
    **overflown -- arguments not caught by previous parts

    Returns:
    report -- measured values, model, residuals and bounds, ExpansionReport

    Raises:
    HypothesisViolated -- when P+ h P+ != h, or (strict) gamma + t h is outside U_R
    PropertyViolated -- in strict mode when the slope or the bound fails
    """

    P.updateAll(overflown, reset = False)

    _params = context.params
    _ell = context.grid.ell

    _ts = [ float(_t) for _t in P.getValue("t_list") ]

    if len(_ts) == 0 or any([ _t <= 0 for _t in _ts ]):
        raise ValueError("Parameter 't_list' has to contain positive values.")

    _eps_P, _, _ = penalizationEpsilon(context, constants)

    _stack = gamma.dense()
    _operator = meanField(_stack, context)
    _spectra = spectraCompute(_operator)

    if h is None:
        if P.getValue("direction") == "zero":
            h = numpy.zeros_like(_stack)
        else:
            h = transferDirection(gamma, context, _spectra)

    h = numpy.asarray(h, dtype = complex)

    if h.shape != _stack.shape:
        raise ValueError("Direction of shape %s does not match the state %s." % (h.shape, _stack.shape))

    hypothesisCheck(h, _spectra, context)

    _base = energyCompute(_stack, context, _eps_P).penalized_total
    _linear = directionalLinear(_stack, h, _eps_P, context, _operator)
    _quadratic = exchangeBilinear(h, h, context) if _params.alpha != 0 else 0.0

    _norms = normsCompute(h, context)
    _h_fiber = numpy.maximum(_norms.norm_X, _norms.fiber_Y_conv)

    _factor = 2 + _eps_P / _params.c ** 2

    with FILELOCK:
        if VERBOSITY > 0:
            print ("expansion:base energy:%.14e linear:%.12e quadratic:%.12e eps_P:%.12e" % (_base, _linear, _quadratic, _eps_P), file=LOGFILE)

    _signed = list(_ts)

    if P.getValue("negative_t"):
        _signed += [ -_t for _t in _ts ]


    def _evaluate(t: float) -> Tuple[bool, float, float, float, float, Optional[float]]:
        """Returns (admissible, measured, model, residual, bound, margin)."""

        _point = _stack + t * h

        if not numpy.any(h):
            return True, _base, _base, 0.0, 0.0, None

        try:
            _relaxed = BlochDensityMatrix.fromDense(_point, _ell)
        except InvalidState:
            return False, None, None, None, None, None

        if tracePerCell(_relaxed) > _params.q + _params.occupation_tol:
            return False, None, None, None, None, None

        _margin = None

        if constants is not None:
            _membership = membershipCheck(_relaxed, context, constants)
            _margin = _membership.margin

            if not _membership.member and strict:
                raise HypothesisViolated("gamma + t h is outside of U_R at t = %e (margin %.6e)." % (t, _margin))

        _retracted, _ = theta(_relaxed, context, constants)

        _measured = energyCompute(_retracted, context, _eps_P).penalized_total
        _model = _base + t * _linear + 0.5 * _params.alpha * t ** 2 * _quadratic

        _bound = _factor * errorNorm(_point, _h_fiber, context, constants)

        return True, _measured, _model, _measured - _model, _bound, _margin


    _results = fiberMap(_evaluate, tqdm(_signed, desc = "expansion", leave = False, disable = log.progressDisabled()))

    _report = ExpansionReport(
        t = _signed, measured = [], model = [], residual = [], err = [], bound = [], admissible = [], membership_margin = [],
        base_energy = _base, linear = _linear, quadratic = _quadratic, eps_P = _eps_P,
    )

    for _t, (_admissible, _measured, _model, _residual, _bound, _margin) in zip(_signed, _results):
        _report.admissible.append(_admissible)
        _report.measured.append(_measured)
        _report.model.append(_model)
        _report.residual.append(_residual)
        _report.bound.append(_bound)
        _report.membership_margin.append(_margin)

        if _admissible and _params.alpha_c > 0:
            _report.err.append(_residual / (_t ** 2 * _params.alpha_c ** 2))
        else:
            _report.err.append(None)

        with FILELOCK:
            if VERBOSITY > 1 and _admissible:
                print ("expansion:t:%.6e measured:%.14e residual:%.6e bound:%.6e" % (_t, _measured, _residual, _bound), file=LOGFILE)


    # Even and odd parts where both signs exist
    for _t in _ts:
        _plus = _signed.index(_t)
        _minus = _signed.index(-_t) if -_t in _signed else None

        if _minus is None or not (_report.admissible[_plus] and _report.admissible[_minus]):
            continue

        _report.even_odd.append({
            "t": _t,
            "even": 0.5 * (_report.residual[_plus] + _report.residual[_minus]),
            "odd": 0.5 * (_report.residual[_plus] - _report.residual[_minus]),
        })


    # Slope of log |residual| over the positive t
    _x = []
    _y = []

    for _t, _a, _r in zip(_signed, _report.admissible, _report.residual):
        if _t > 0 and _a and abs(_r) > 0:
            _x.append(numpy.log(_t))
            _y.append(numpy.log(abs(_r)))

    if len(_x) >= 2:
        _report.slope = float(numpy.polyfit(_x, _y, 1)[0])

    _scale = max(1.0, abs(_base))
    _admitted = [ _i for _i, _a in enumerate(_report.admissible) if _a ]

    if _params.alpha == 0 or not numpy.any(h):
        _report.properties["residual_vanishes"] = all([ abs(_report.residual[_i]) <= 1e-12 * _scale for _i in _admitted ])
    else:
        _report.properties["slope_at_least_min"] = _report.slope is not None and _report.slope >= P.getValue("slope_min")
        _report.properties["err_within_bound"] = errWithinBound(_report)

    with FILELOCK:
        if VERBOSITY > 0:
            print ("expansion:slope:%s properties:%s" % (_report.slope, _report.properties), file=LOGFILE)

    if strict and not all(_report.properties.values()):
        raise PropertyViolated("Expansion properties failed: %s" % ", ".join([ _k for _k, _v in _report.properties.items() if not _v ]))

    return _report
