#!/usr/bin/env python3
# states.py
"""Density matrices, norms and the Dirac-Fock energy.

A density matrix is stored per fiber in low-rank form, orthonormal
orbitals C (n_b x r) with occupations f in [0, 1], so that
gamma_xi = C diag(f) C^*. Norms, traces and energies average over
the grid in grid order.
"""
######################
# Imports & Globals
######################

import numpy

# Singular values for trace norms
from scipy.linalg import svdvals

from dataclasses import dataclass, field, asdict

# Typing
from typing import Dict, List, Optional, Sequence

from dfcrystal.errors import InvalidState
from dfcrystal.operators import Context, BlochOperator
from dfcrystal.operators import denseStack, densityFourier, exchangeMatrices, interactionParts, meanField
from dfcrystal.operators import hermitize, phaseFix, traceProduct, traces, fiberMap


# Tolerances of the stored representation
OCCUPATION_CLAMP = 1e-12
ORTHONORMALITY_TOL = 1e-12
DROP_TOL = 1e-14


######################
# BlochDensityMatrix
######################

class BlochDensityMatrix(object):
    """Low-rank periodic one-particle density matrix."""

    def __init__(self, orbitals: Sequence[numpy.ndarray], occupations: Sequence[numpy.ndarray], ell: float = None):
        """Validates and stores the per fiber factors.

        Arguments:
        orbitals -- per fiber orbital coefficients, list of n_b x r numpy.ndarray
        occupations -- per fiber occupations, list of r numpy.ndarray
        ell -- cell side the state belongs to, float, default None

        Raises:
        InvalidState -- on occupations outside [-1e-12, 1 + 1e-12] or non-orthonormal orbitals
        """

        if len(orbitals) != len(occupations):
            raise InvalidState("Got %d orbital blocks but %d occupation vectors." % (len(orbitals), len(occupations)))

        _orbitals = []
        _occupations = []

        for _i, (_c, _f) in enumerate(zip(orbitals, occupations)):
            _c = numpy.array(_c, dtype = complex)
            _f = numpy.array(_f, dtype = float).ravel()

            if _c.ndim != 2 or _c.shape[1] != _f.shape[0]:
                raise InvalidState("Fiber %d: orbitals of shape %s do not match %d occupations." % (_i, _c.shape, _f.shape[0]))

            if numpy.any(_f < -OCCUPATION_CLAMP) or numpy.any(_f > 1 + OCCUPATION_CLAMP):
                raise InvalidState("Fiber %d: occupations outside [0, 1]: min %e, max %e." % (_i, numpy.min(_f), numpy.max(_f)))

            if _f.shape[0] > 0:
                _overlap = _c.conj().T @ _c - numpy.eye(_f.shape[0])

                if numpy.max(numpy.abs(_overlap)) > ORTHONORMALITY_TOL:
                    raise InvalidState("Fiber %d: orbitals are not orthonormal (%e)." % (_i, numpy.max(numpy.abs(_overlap))))

            _c.setflags(write = False)
            _f = numpy.clip(_f, 0.0, 1.0)
            _f.setflags(write = False)

            _orbitals.append(_c)
            _occupations.append(_f)

        self.orbitals = tuple(_orbitals)
        self.occupations = tuple(_occupations)
        self.ell = ell


    @classmethod
    def zero(cls, n_fibers: int, n_b: int, ell: float = None) -> "BlochDensityMatrix":
        return cls([ numpy.zeros((n_b, 0), dtype = complex) ] * n_fibers, [ numpy.zeros(0) ] * n_fibers, ell)


    @classmethod
    def fromDense(cls, stack: numpy.ndarray, ell: float = None, drop_tol: float = DROP_TOL) -> "BlochDensityMatrix":
        """Re-extracts the low-rank form of a dense stack by diagonalization.

        Eigenvalues below 'drop_tol' are discarded.

        Raises:
        InvalidState -- when an eigenvalue lies outside [-1e-12, 1 + 1e-12]
        """

        _orbitals = []
        _occupations = []

        for _i, _matrix in enumerate(numpy.asarray(stack)):
            _values, _vectors = numpy.linalg.eigh(hermitize(_matrix))

            if _values.shape[0] > 0 and (_values[0] < -OCCUPATION_CLAMP or _values[-1] > 1 + OCCUPATION_CLAMP):
                raise InvalidState("Fiber %d: eigenvalues of gamma outside [0, 1]: min %e, max %e." % (_i, _values[0], _values[-1]))

            _keep = _values > drop_tol

            # Largest occupations first
            _order = numpy.argsort(-_values[_keep], kind = "stable")

            _orbitals.append(phaseFix(_vectors[:, _keep][:, _order]))
            _occupations.append(_values[_keep][_order])

        return cls(_orbitals, _occupations, ell)


    @property
    def size(self) -> int:
        return len(self.orbitals)

    @property
    def n_b(self) -> int:
        return self.orbitals[0].shape[0]

    @property
    def ranks(self) -> List[int]:
        return [ _f.shape[0] for _f in self.occupations ]


    def fiberDense(self, index: int) -> numpy.ndarray:
        _c = self.orbitals[index]
        return hermitize((_c * self.occupations[index][None, :]) @ _c.conj().T)


    def dense(self) -> numpy.ndarray:
        """Dense N x n_b x n_b stack."""
        return numpy.asarray([ self.fiberDense(_i) for _i in range(self.size) ])


    def trace(self) -> float:
        return tracePerCell(self)


    def descriptor(self) -> Dict[str, any]:
        return {"fibers": self.size, "n_b": self.n_b, "ranks": self.ranks}


######################
# Predicates
######################

def tracePerCell(gamma: any) -> float:
    """Grid average of Tr gamma_xi.

    Arguments:
    gamma -- density matrix or dense stack, BlochDensityMatrix or numpy.ndarray

    Returns:
    trace -- electrons per cell, float
    """

    if isinstance(gamma, BlochDensityMatrix):
        return float(sum([ numpy.sum(_f) for _f in gamma.occupations ]) / gamma.size)

    return float(numpy.sum(traces(gamma)) / denseStack(gamma).shape[0])


def inGammaLeq(gamma: BlochDensityMatrix, q: int, tol: float) -> bool:
    """Membership in Gamma_{<=q} (occupations are valid by construction)."""
    return tracePerCell(gamma) <= q + tol


def inGammaEq(gamma: BlochDensityMatrix, q: int, tol: float) -> bool:
    """Membership in Gamma_q."""
    return abs(tracePerCell(gamma) - q) <= tol


######################
# Energy
######################

@dataclass
class EnergyBreakdown:
    """Terms of the Dirac-Fock energy.

    The exchange term is stored with its sign, so that
    total = dirac + external + hartree + exchange.
    """

    dirac_term: float
    external_term: float
    hartree_term: float
    exchange_term: float
    total: float
    trace: float
    eps_P: Optional[float] = None
    penalized_total: Optional[float] = None

    def dict(self) -> Dict[str, any]:
        return asdict(self)


def energyCompute(gamma: any, context: Context, eps_P: float = None, parts: tuple = None) -> EnergyBreakdown:
    """Evaluates the periodic Dirac-Fock energy.

    E = avg Tr[D gamma] - z int G rho + (alpha/2) int rho (rho * G)
        - (alpha/2) avg Tr[W_gamma gamma]

    Arguments:
    gamma -- density matrix, BlochDensityMatrix or dense stack
    context -- operator context, Context
    eps_P -- penalization parameter, float, default None (no penalized total)
    parts -- output of 'operators.interactionParts' for gamma, 3-tuple, default None

    Returns:
    energy -- breakdown of the terms, EnergyBreakdown
    """

    _params = context.params
    _stack = denseStack(gamma)
    _ell3 = context.grid.ell ** 3

    if parts is None:
        if _params.alpha != 0:
            parts = interactionParts(_stack, context)
        else:
            parts = (densityFourier(_stack, context.basis), None, None)

    _rho = parts[0]

    _dirac = traceProduct(context.free, _stack)
    _external = -_params.z * _ell3 * float(numpy.real(numpy.sum(context.g_hat * numpy.conj(_rho.coefficients))))
    _hartree = 0.5 * _params.alpha * _ell3 ** 2 * float(numpy.sum(context.g_hat * numpy.abs(_rho.coefficients) ** 2))

    if _params.alpha != 0:
        _exchange = -0.5 * _params.alpha * traceProduct(parts[2], _stack)
    else:
        _exchange = 0.0

    _total = _dirac + _external + _hartree + _exchange
    _trace = tracePerCell(gamma)

    return EnergyBreakdown(
        dirac_term = _dirac,
        external_term = _external,
        hartree_term = _hartree,
        exchange_term = _exchange,
        total = _total,
        trace = _trace,
        eps_P = eps_P,
        penalized_total = None if eps_P is None else _total - eps_P * _trace + eps_P * _params.q,
    )


def energyOperatorForm(gamma: any, context: Context) -> float:
    """Energy as Tr[D_gamma gamma] - (alpha/2) Tr[V_gamma gamma]."""

    _params = context.params
    _stack = denseStack(gamma)

    if _params.alpha == 0:
        return traceProduct(context.external, _stack)

    _, _hartree, _exchange = parts = interactionParts(_stack, context)

    _operator = meanField(_stack, context, parts)
    _potential = _hartree[None, :, :] - _exchange

    return traceProduct(_operator, _stack) - 0.5 * _params.alpha * traceProduct(_potential, _stack)


######################
# Norms
######################

@dataclass
class NormReport:
    """Norms of a Hermitian Bloch operator and their per fiber parts."""

    norm_X: float
    norm_Y: float
    norm_Y_conv: float
    norm_Xc: float
    norm_Yc: float
    norm_Yc_conv: float
    fiber_X: numpy.ndarray = field(repr = False)
    fiber_Y: numpy.ndarray = field(repr = False)
    fiber_Y_conv: numpy.ndarray = field(repr = False)
    fiber_Xc: numpy.ndarray = field(repr = False)

    @property
    def combined(self) -> float:
        """Norm of X intersected with Y."""
        return max(self.norm_X, self.norm_Y)

    @property
    def combined_c(self) -> float:
        """Norm of X_c intersected with the rescaled convolution norm."""
        return max(self.norm_Xc, self.norm_Yc_conv)

    def dict(self) -> Dict[str, float]:
        return {
            "norm_X": self.norm_X, "norm_Y": self.norm_Y, "norm_Y_conv": self.norm_Y_conv,
            "norm_Xc": self.norm_Xc, "norm_Yc": self.norm_Yc, "norm_Yc_conv": self.norm_Yc_conv,
        }


def weightedTraceNorms(stack: numpy.ndarray, weights: numpy.ndarray) -> numpy.ndarray:
    """Per fiber trace norms of diag(w) h diag(w)."""
    return numpy.asarray(fiberMap(
        lambda i: float(numpy.sum(svdvals(weights[i][:, None] * stack[i] * weights[i][None, :]))),
        range(stack.shape[0])
    ))


def convolutionNorms(fiber_norms: numpy.ndarray, context: Context) -> numpy.ndarray:
    """Per target fiber value of avg_xi' ||h_xi'|| / |xi - xi'|^2."""
    _kernel = context.weights.inverseSquare()
    return (_kernel.T @ fiber_norms) / fiber_norms.shape[0]


def normsCompute(h: any, context: Context) -> NormReport:
    """Computes the X, Y, convolution and c-rescaled norms of 'h'.

    Arguments:
    h -- Hermitian Bloch operator, BlochDensityMatrix or N x n_b x n_b numpy.ndarray
    context -- operator context, Context

    Returns:
    norms -- report with per fiber contributions, NormReport
    """

    _stack = denseStack(h)
    _c = context.params.c

    _fiber_X = weightedTraceNorms(_stack, context.laplace_quarter)
    _fiber_Xc = weightedTraceNorms(_stack, context.dirac_root)
    _fiber_Y = numpy.asarray(fiberMap(lambda i: float(numpy.max(svdvals(_stack[i]), initial = 0.0)), range(_stack.shape[0])))
    _fiber_Y_conv = convolutionNorms(_fiber_Y, context)

    _Y_conv = float(numpy.max(_fiber_Y_conv))
    _Y = float(numpy.max(_fiber_Y))

    return NormReport(
        norm_X = float(numpy.mean(_fiber_X)),
        norm_Y = _Y,
        norm_Y_conv = _Y_conv,
        norm_Xc = float(numpy.mean(_fiber_Xc)),
        norm_Yc = _c * _Y,
        norm_Yc_conv = _c * _Y_conv,
        fiber_X = _fiber_X,
        fiber_Y = _fiber_Y,
        fiber_Y_conv = _fiber_Y_conv,
        fiber_Xc = _fiber_Xc,
    )


######################
# Derivatives
######################

def exchangeBilinear(h: any, h2: any, context: Context) -> float:
    """Quadratic form Tr[V_h h2] = Tr[(rho_h * G) h2] - Tr[W_h h2]."""

    _a = denseStack(h)
    _b = denseStack(h2)
    _ell3 = context.grid.ell ** 3

    _rho_a = densityFourier(_a, context.basis)
    _rho_b = densityFourier(_b, context.basis)

    _hartree = _ell3 ** 2 * float(numpy.real(numpy.sum(context.g_hat * _rho_a.coefficients * numpy.conj(_rho_b.coefficients))))

    return _hartree - traceProduct(exchangeMatrices(_a, context), _b)


def directionalLinear(gamma: any, h: any, eps_P: float, context: Context, operator: BlochOperator = None) -> float:
    """First variation avg Tr[(D_gamma - eps_P) h].

    Arguments:
    gamma -- base point, BlochDensityMatrix or dense stack
    h -- direction, BlochDensityMatrix or dense stack
    eps_P -- penalization parameter, float
    context -- operator context, Context
    operator -- precomputed D_gamma, BlochOperator, default None
    """

    if operator is None:
        operator = meanField(gamma, context)

    _h = denseStack(h)

    return traceProduct(operator, _h) - eps_P * tracePerCell(_h)
