#!/usr/bin/env python3
# retraction.py
"""Retraction onto the constrained set.

T(gamma) = P+_gamma gamma P+_gamma, where P+_gamma projects on the
positive spectrum of the mean-field operator, and theta(gamma) is
the limit of T^n(gamma). Steps are measured in the combined norm
max(||.||_{X_c}, ||.||_{Y_c conv}).
"""
######################
# Imports & Globals
######################

import numpy

from scipy.linalg import svdvals

from dataclasses import dataclass, field

# Typing
from typing import Dict, List, Optional, Tuple

from dfcrystal.errors import InvalidState, NonContraction, MaxIterations
from dfcrystal.operators import Context, SpectralDecomp, meanField, spectraCompute, positiveProjector, zeroModeCheck
from dfcrystal.operators import phaseFix, fiberMap
from dfcrystal.states import BlochDensityMatrix, tracePerCell, normsCompute, weightedTraceNorms, convolutionNorms

import dfcrystal.log as log


# Occupations below are dropped from the low-rank form
DROP_TOL = 1e-14

# Occupations above 1 + this are an error
CLAMP_TOL = 1e-12

# Consecutive non-contracting steps before giving up
NON_CONTRACTION_LIMIT = 3


######################
# Types
######################

@dataclass
class RetractionTrace:
    """Record of a theta run."""

    records: List[Dict[str, float]] = field(default_factory = list)
    converged: bool = False
    iterations: int = 0
    productive: int = 0
    L: Optional[float] = None
    monotone: bool = True

    @property
    def max_ratio(self) -> float:
        _ratios = [ _r["ratio"] for _r in self.records if _r["ratio"] is not None ]
        return max(_ratios) if len(_ratios) > 0 else 0.0

    def rows(self) -> List[List[any]]:
        """CSV rows (iteration, step_norm_Xc, step_norm_Yc, ratio, margin)."""
        return [ [_r["iteration"], _r["step_norm_Xc"], _r["step_norm_Yc"], _r["ratio"], _r["margin"]] for _r in self.records ]


@dataclass
class MembershipReport:
    """Both summands of the contraction-set condition and the margin."""

    first: float
    second: float
    value: float
    R: float
    M: float
    margin: float
    member: bool

    def dict(self) -> Dict[str, any]:
        return dict(self.__dict__)


######################
# T
######################

def applyT(gamma: BlochDensityMatrix, context: Context, spectra: List[SpectralDecomp] = None) -> Tuple[BlochDensityMatrix, List[SpectralDecomp]]:
    """One application of T(gamma) = P+ gamma P+.

    The low-rank form is re-extracted from the SVD of P+ C diag(f)^1/2,
    whose squared singular values are the new occupations.

    Arguments:
    gamma -- density matrix in Gamma_{<=q}, BlochDensityMatrix
    context -- operator context, Context
    spectra -- decompositions of D_gamma, list of SpectralDecomp, default None (computed)

    Returns:
    T_gamma -- projected density matrix, BlochDensityMatrix
    spectra -- decompositions of D_gamma, list of SpectralDecomp

    Raises:
    InvalidState -- when gamma is not in Gamma_{<=q} or an occupation exceeds 1 + 1e-12
    ZeroModeAmbiguity -- when D_gamma has an eigenvalue close to 0
    """

    _params = context.params

    if tracePerCell(gamma) > _params.q + _params.occupation_tol:
        raise InvalidState("Trace per cell %.12e exceeds q = %d." % (tracePerCell(gamma), _params.q))

    if spectra is None:
        spectra = spectraCompute(meanField(gamma, context))

    def _project(index: int) -> Tuple[numpy.ndarray, numpy.ndarray]:
        _s = spectra[index]
        zeroModeCheck(_s, _params)

        _c = gamma.orbitals[index]
        _f = gamma.occupations[index]

        if _f.shape[0] == 0:
            return _c, _f

        _v = _s.eigenvectors[:, _s.positive]
        _b = _v @ (_v.conj().T @ _c) * numpy.sqrt(_f)[None, :]

        _u, _sv, _ = numpy.linalg.svd(_b, full_matrices = False)
        _occupations = _sv ** 2

        if numpy.any(_occupations > 1 + CLAMP_TOL):
            raise InvalidState("Fiber %d: occupation %.16f of P+ gamma P+ exceeds 1." % (index, numpy.max(_occupations)))

        _keep = _occupations > DROP_TOL

        return phaseFix(_u[:, _keep]), numpy.minimum(_occupations[_keep], 1.0)

    _projected = fiberMap(_project, range(gamma.size))

    return BlochDensityMatrix([ _c for _c, _ in _projected ], [ _f for _, _f in _projected ], gamma.ell), spectra


######################
# Norms of steps
######################

def stepNorms(a: BlochDensityMatrix, b: BlochDensityMatrix, context: Context) -> Tuple[float, float]:
    """||a - b|| in X_c and in the rescaled convolution norm."""

    _norms = normsCompute(a.dense() - b.dense(), context)

    return _norms.norm_Xc, _norms.norm_Yc_conv


def membershipCheck(gamma: BlochDensityMatrix, context: Context, constants: any, step: float = None) -> MembershipReport:
    """Membership in the contraction set U_R.

    value = (1/c) max(||gamma |D|^1/2||_{S11}, ||gamma||_conv) + (M/c^2) ||T(gamma) - gamma||

    Arguments:
    gamma -- density matrix, BlochDensityMatrix
    context -- operator context, Context
    constants -- estimated constants providing M and R, ConstantsEstimate
    step -- precomputed ||T(gamma) - gamma|| in the combined norm, float, default None

    Returns:
    report -- summands and margin R - value, MembershipReport
    """

    _c = context.params.c

    def _weighted(index: int) -> float:
        _f = gamma.occupations[index]

        if _f.shape[0] == 0:
            return 0.0

        _x = (_f[:, None] * gamma.orbitals[index].conj().T) * context.dirac_root[index][None, :]

        return float(numpy.sum(svdvals(_x)))

    _s11 = float(numpy.mean(fiberMap(_weighted, range(gamma.size))))

    _spectral = numpy.asarray([ float(numpy.max(_f, initial = 0.0)) for _f in gamma.occupations ])
    _conv = float(numpy.max(convolutionNorms(_spectral, context)))

    _first = max(_s11, _conv) / _c

    if step is None:
        _t, _ = applyT(gamma, context)
        step = max(stepNorms(_t, gamma, context))

    _M = constants.M

    if step == 0:
        _second = 0.0
    else:
        _second = _M * step / _c ** 2

    _value = _first + _second
    _R = constants.R

    return MembershipReport(first = _first, second = _second, value = _value, R = _R, M = _M, margin = _R - _value, member = bool(_value < _R))


######################
# theta
######################

def theta(gamma: BlochDensityMatrix, context: Context, constants: any = None, strict: bool = False) -> Tuple[BlochDensityMatrix, RetractionTrace]:
    """Iterates T until the step norm drops below retraction_tol.

    Arguments:
    gamma -- starting point, BlochDensityMatrix
    context -- operator context, Context
    constants -- constants for the membership margin and L, ConstantsEstimate, default None
    strict -- raise when the starting point is outside U_R, bool, default False

    Returns:
    theta_gamma -- last iterate, BlochDensityMatrix
    trace -- per iteration record, RetractionTrace

    Raises:
    NonContraction -- after 3 consecutive steps with ratio >= 1
    MaxIterations -- when retraction_max_iter is reached
    """

    _params = context.params
    _trace = RetractionTrace(L = constants.L if constants is not None else None)

    _current = gamma
    _previous = None
    _bad = 0

    for _n in range(1, _params.retraction_max_iter + 1):
        _next, _ = applyT(_current, context)

        _xc, _yc = stepNorms(_next, _current, context)
        _step = max(_xc, _yc)

        _ratio = _step / _previous if _previous is not None and _previous > 0 else None

        _margin = None

        if constants is not None:
            _membership = membershipCheck(_current, context, constants, step = _step)
            _margin = _membership.margin

            if _n == 1 and not _membership.member:
                if strict:
                    raise InvalidState("Starting point is outside of U_R (margin %.6e)." % _margin)

                log.log("theta:outside margin:%.12e" % _margin, 1)

        _trace.records.append({"iteration": _n, "step_norm_Xc": _xc, "step_norm_Yc": _yc, "ratio": _ratio, "margin": _margin})
        _trace.iterations = _n

        log.log("theta:%d step:%.12e ratio:%s" % (_n, _step, "%.6e" % _ratio if _ratio is not None else "-"), 3)

        if _ratio is not None and _n > 2 and _ratio > 1 + 1e-8 and _step > _params.retraction_tol:
            _trace.monotone = False

        if _step <= _params.retraction_tol:
            _trace.converged = True
            _trace.productive = _n - 1

            log.log("theta:converged iterations:%d monotone:%s" % (_n, _trace.monotone), 2)

            return _next, _trace

        _trace.productive = _n

        if _ratio is not None and _ratio >= 1:
            _bad += 1
        else:
            _bad = 0

        if _bad >= NON_CONTRACTION_LIMIT:
            raise NonContraction("Retraction step ratio >= 1 for %d consecutive iterations (last %.6e)." % (_bad, _ratio))

        _previous = _step
        _current = _next

    raise MaxIterations("Retraction did not converge in %d iterations." % _params.retraction_max_iter)


######################
# Bounds
######################

def projectorDifferenceBound(gamma: BlochDensityMatrix, gamma2: BlochDensityMatrix, context: Context, constants: any) -> Tuple[float, float]:
    """Weighted projector difference against its Lipschitz bound.

    lhs = max_xi || |D_xi|^1/2 (P+_gamma,xi - P+_gamma',xi) ||
    rhs = max_xi A / (1 + C_Y) max(||gamma - gamma'||_X, ||gamma - gamma'||_{Y(xi)})

    Returns:
    lhs -- measured value, float
    rhs -- bound with the estimated constants, float
    """

    _params = context.params

    _spectra = spectraCompute(meanField(gamma, context))
    _spectra2 = spectraCompute(meanField(gamma2, context))

    def _difference(index: int) -> float:
        _p = positiveProjector(_spectra[index], _params)
        _p2 = positiveProjector(_spectra2[index], _params)

        return float(numpy.linalg.norm(context.dirac_root[index][:, None] * (_p - _p2), 2))

    _lhs = float(numpy.max(fiberMap(_difference, range(gamma.size))))

    _norms = normsCompute(gamma.dense() - gamma2.dense(), context)
    _rhs = constants.A / (1 + constants.C_Y) * float(numpy.max(numpy.maximum(_norms.norm_X, _norms.fiber_Y_conv)))

    return _lhs, _rhs


def gammaPlusDeviation(gamma: BlochDensityMatrix, context: Context) -> float:
    """||P-_gamma gamma P-_gamma||_X, zero on the constrained set."""

    _spectra = spectraCompute(meanField(gamma, context))
    _stack = gamma.dense()

    _projected = []

    for _i, _s in enumerate(_spectra):
        _v = _s.eigenvectors[:, ~_s.positive]
        _projected.append(_v @ (_v.conj().T @ _stack[_i] @ _v) @ _v.conj().T)

    return float(numpy.mean(weightedTraceNorms(numpy.asarray(_projected), context.laplace_quarter)))
