#!/usr/bin/env python3
# solver.py
"""Minimization of the penalized Dirac-Fock functional.

Self-consistent field iteration with optimal damping: the aufbau
state of the current mean-field operator gives a direction, the
step length minimizes the (exactly quadratic) penalized energy on
the segment, and the damped state is retracted by theta.
"""
######################
# Imports & Globals
######################

import numpy

from dataclasses import dataclass, field

# Typing
from typing import Callable, Dict, List, Tuple

from dfcrystal.model import ModelParams, BrillouinGrid, gridBuild, basisBuild
from dfcrystal.errors import InsufficientStates, NoDescent, MaxIterations, AssumptionViolated, PropertyViolated
from dfcrystal.operators import Context, SpectralDecomp, BlochOperator
from dfcrystal.operators import meanField, interactionParts, spectraCompute, densityFourier, hartreeMatrix
from dfcrystal.operators import traceProduct, hermitize
from dfcrystal.states import BlochDensityMatrix, EnergyBreakdown, energyCompute, normsCompute, exchangeBilinear, tracePerCell
from dfcrystal.constants import ConstantsEstimate, AssumptionReport, assumptionsCheck, cStar
from dfcrystal.retraction import theta

import dfcrystal.log as log


# Halvings of the damping before giving up
BACKTRACK_LIMIT = 30

# Relative energy change treated as rounding once the slope is flat
STALL_TOLERANCE = 1e-10


######################
# Types
######################

@dataclass
class FillingResult:
    """Aufbau occupations of all fibers.

    'occupations[i]' is aligned with the eigenvalues of fiber i
    (negative eigenvalues always carry 0).
    """

    occupations: List[numpy.ndarray]
    nu: float
    fractional_block: List[Tuple[int, int, float]]
    tie_band: List[Tuple[int, int]]
    filled_count: List[int]
    total: float
    exhausted: bool = False


    def densityMatrix(self, spectra: List[SpectralDecomp], ell: float = None) -> BlochDensityMatrix:
        """Density matrix of the filled eigenvectors."""

        _orbitals = []
        _occupations = []

        for _s, _f in zip(spectra, self.occupations):
            _filled = _f > 0
            _orbitals.append(_s.eigenvectors[:, _filled])
            _occupations.append(_f[_filled])

        return BlochDensityMatrix(_orbitals, _occupations, ell)


    def dict(self) -> Dict[str, any]:
        return {
            "nu": self.nu,
            "total": self.total,
            "exhausted": self.exhausted,
            "filled_count": list(self.filled_count),
            "fractional_block": [ [_f, _i, _o] for _f, _i, _o in self.fractional_block ],
            "tie_band": [ [_f, _i] for _f, _i in self.tie_band ],
        }


@dataclass
class Solution:
    """Result of 'scfSolve'."""

    gamma: BlochDensityMatrix
    nu: float
    filling: FillingResult
    energies: EnergyBreakdown
    history: List[Dict[str, float]]
    assumptions: AssumptionReport
    constants: ConstantsEstimate
    eps_P: float
    c_star: float
    c_star_bound: float
    residual: float
    converged: bool
    iterations: int
    properties: Dict[str, bool] = field(default_factory = dict)


    def dict(self) -> Dict[str, any]:
        return {
            "nu": self.nu,
            "eps_P": self.eps_P,
            "c_star": self.c_star,
            "c_star_bound": self.c_star_bound,
            "residual": self.residual,
            "converged": self.converged,
            "iterations": self.iterations,
            "energies": self.energies.dict(),
            "filling": self.filling.dict(),
            "assumptions": self.assumptions.dict() if self.assumptions is not None else None,
            "constants": self.constants.dict() if self.constants is not None else None,
            "properties": dict(self.properties),
            "trace": self.gamma.trace(),
            "ranks": self.gamma.ranks,
        }


######################
# Penalization
######################

def penalizationEpsilon(context: Context, constants: ConstantsEstimate) -> Tuple[float, float, float]:
    """eps_P = c*(q + 1) + eps_pen_margin.

    Returns:
    eps_P -- penalization parameter, float
    c_star -- c*(q + 1), float
    bound -- analytic over-bound c^2 + Sigma(q + 1), float
    """

    _params = context.params
    _c_star, _bound = cStar(_params.q + 1, _params, constants.C_G, constants.C_EE, context.basis, context.grid)

    if _c_star > _bound:
        log.log("penalization:window_exceeds_bound c_star:%.12e bound:%.12e" % (_c_star, _bound), 1)

    return _c_star + _params.eps_pen_margin, _c_star, _bound


######################
# Filling
######################

def aufbauFill(spectra: List[SpectralDecomp], q: int, grid: BrillouinGrid, params: ModelParams, allow_partial: bool = False) -> FillingResult:
    """Fills q electrons per cell into the positive spectrum.

    All positive eigenvalues of all fibers (weight 1/N each) are sorted
    by (eigenvalue, fiber, index). The last filled level is nu; states
    within tie_tol of nu share the remaining weight equally.

    Arguments:
    spectra -- decompositions of all fibers, list of SpectralDecomp
    q -- electrons per cell, int
    grid -- Brillouin zone grid, BrillouinGrid
    params -- model parameters (tie tolerance), ModelParams
    allow_partial -- fill what is available instead of raising, bool, default False

    Returns:
    filling -- occupations, nu and the tie band, FillingResult

    Raises:
    InsufficientStates -- when fewer than q N positive states exist
    """

    _n = grid.size
    _n_fill = q * _n

    _lam = []
    _fib = []
    _idx = []

    for _f, _s in enumerate(spectra):
        _pos = numpy.nonzero(_s.eigenvalues > 0)[0]
        _lam.append(_s.eigenvalues[_pos])
        _fib.append(numpy.full(_pos.shape[0], _f))
        _idx.append(_pos)

    _lam = numpy.concatenate(_lam)
    _fib = numpy.concatenate(_fib)
    _idx = numpy.concatenate(_idx)

    _occupations = [ numpy.zeros(_s.eigenvalues.shape[0]) for _s in spectra ]

    _exhausted = False

    if _lam.shape[0] < _n_fill:
        if not allow_partial:
            raise InsufficientStates("Only %d positive states for %d electrons on the grid." % (_lam.shape[0], _n_fill))

        _exhausted = True
        _n_fill = _lam.shape[0]

    if _n_fill == 0:
        return FillingResult(_occupations, 0.0, [], [], [0] * _n, 0.0, _exhausted)

    _order = numpy.lexsort((_idx, _fib, _lam))

    _nu = float(_lam[_order[_n_fill - 1]])
    _tol = params.tie_tol

    _below = _lam < _nu - _tol
    _tie = numpy.abs(_lam - _nu) <= _tol

    _n_below = int(numpy.sum(_below))
    _n_tie = int(numpy.sum(_tie))
    _share = (_n_fill - _n_below) / _n_tie

    for _j in numpy.nonzero(_below)[0]:
        _occupations[_fib[_j]][_idx[_j]] = 1.0

    _fractional = []
    _band = []

    for _j in numpy.nonzero(_tie)[0]:
        _occupations[_fib[_j]][_idx[_j]] = _share
        _band.append((int(_fib[_j]), int(_idx[_j])))

        if _share < 1.0:
            _fractional.append((int(_fib[_j]), int(_idx[_j]), float(_share)))

    _band.sort()
    _fractional.sort()

    _filled = [ int(numpy.sum(_o > 0)) for _o in _occupations ]
    _total = float(sum([ numpy.sum(_o) for _o in _occupations ]) / _n)

    log.log("aufbau:nu:%.12e below:%d tie:%d share:%.12e" % (_nu, _n_below, _n_tie, _share), 3)

    return FillingResult(_occupations, _nu, _fractional, _band, _filled, _total, _exhausted)


######################
# Residual
######################

def scfResidual(gamma: BlochDensityMatrix, nu: float, context: Context, spectra: List[SpectralDecomp] = None) -> float:
    """Residual of gamma = 1_[0, nu)(D_gamma) + delta.

    delta is the Fermi-band block of gamma with its eigenvalues
    clamped into [0, 1]; the residual is measured in max(X, Y).

    Arguments:
    gamma -- density matrix, BlochDensityMatrix
    nu -- Fermi level, float
    context -- operator context, Context
    spectra -- decompositions of D_gamma, list of SpectralDecomp, default None

    Returns:
    residual -- norm of the difference, float
    """

    if spectra is None:
        spectra = spectraCompute(meanField(gamma, context))

    _tol = context.params.tie_tol
    _stack = gamma.dense()

    _difference = []

    for _i, _s in enumerate(spectra):
        _lam = _s.eigenvalues
        _low = _s.eigenvectors[:, (_lam > 0) & (_lam < nu - _tol)]
        _band = _s.eigenvectors[:, numpy.abs(_lam - nu) <= _tol]

        _block = hermitize(_band.conj().T @ _stack[_i] @ _band)
        _values, _vectors = numpy.linalg.eigh(_block)
        _delta = _band @ ((_vectors * numpy.clip(_values, 0.0, 1.0)) @ _vectors.conj().T) @ _band.conj().T

        _difference.append(_stack[_i] - _low @ _low.conj().T - _delta)

    return normsCompute(numpy.asarray(_difference), context).combined


######################
# Initial guesses
######################

def initialGuess(context: Context, kind: str = "free-fill", gamma: BlochDensityMatrix = None) -> BlochDensityMatrix:
    """Starting density matrix of the SCF.

    free-fill -- aufbau on D - zG
    atomic-guess -- aufbau on D - zG + alpha rho_0 * G, rho_0 of the free fill
    checkpoint -- 'gamma' as given
    """

    _params = context.params

    if kind == "checkpoint":
        if gamma is None:
            raise ValueError("Initial guess 'checkpoint' requires a density matrix.")
        return gamma

    _spectra = spectraCompute(BlochOperator(matrices = context.external))
    _free = aufbauFill(_spectra, _params.q, context.grid, _params).densityMatrix(_spectra, context.grid.ell)

    if kind == "free-fill":
        return _free

    if kind == "atomic-guess":
        _rho = densityFourier(_free, context.basis)
        _operator = hermitize(context.external + _params.alpha * hartreeMatrix(_rho, context.basis)[None, :, :])

        _spectra = spectraCompute(BlochOperator(matrices = _operator))

        return aufbauFill(_spectra, _params.q, context.grid, _params).densityMatrix(_spectra, context.grid.ell)

    raise ValueError("Unknown initial guess '%s'." % kind)


######################
# SCF
######################

def stepLength(slope: float, curvature: float, scale: float) -> float:
    """Minimizer in [0, 1] of beta slope + beta^2 curvature / 2."""

    if slope >= -1e-14 * scale:
        return 0.0

    if curvature <= 0:
        return 1.0

    return min(1.0, -slope / curvature)


def candidateResidual(gamma: BlochDensityMatrix, context: Context) -> float:
    """SCF residual of 'gamma' at its own Fermi level."""

    _spectra = spectraCompute(meanField(gamma, context))
    _filling = aufbauFill(_spectra, context.params.q, context.grid, context.params)

    return scfResidual(gamma, _filling.nu, context, _spectra)


def scfSolve(context: Context, constants: ConstantsEstimate, initial: str = "free-fill", gamma: BlochDensityMatrix = None, strict: bool = False,
        callback: Callable[[int, BlochDensityMatrix], None] = None) -> Solution:
    """Minimizes the penalized energy E(gamma) - eps_P Tr gamma + eps_P q.

    Arguments:
    context -- operator context, Context
    constants -- estimated constants, ConstantsEstimate
    initial -- 'free-fill', 'atomic-guess' or 'checkpoint', str, default 'free-fill'
    gamma -- starting point for 'checkpoint', BlochDensityMatrix, default None
    strict -- assert the assumptions and the solution properties, bool, default False
    callback -- called with (iteration, gamma) after every accepted step, callable, default None

    Returns:
    solution -- minimizer with history and reports, Solution

    Raises:
    AssumptionViolated -- in strict mode when a clause fails
    NoDescent -- when no descent exists while the residual is above tolerance
    MaxIterations -- when scf_max_iter is reached
    PropertyViolated -- in strict mode when the solution properties fail
    """

    _params = context.params

    _assumptions = assumptionsCheck(constants, context)

    if strict and not _assumptions.passed:
        raise AssumptionViolated("Assumption clauses failed: %s" % ", ".join([ _c.name for _c in _assumptions.clauses if not _c.holds ]))

    _eps_P, _c_star, _c_bound = penalizationEpsilon(context, constants)

    log.log("scf:start eps_P:%.12e c_star:%.12e bound:%.12e initial:%s" % (_eps_P, _c_star, _c_bound, initial), 1)

    _gamma = initialGuess(context, initial, gamma)
    _energy = energyCompute(_gamma, context, _eps_P)

    _history = []
    _converged = False
    _iteration = 0

    for _iteration in range(1, _params.scf_max_iter + 1):
        _stack = _gamma.dense()

        _parts = interactionParts(_stack, context) if _params.alpha != 0 else None
        _operator = meanField(_stack, context, _parts)
        _spectra = spectraCompute(_operator)

        _filling = aufbauFill(_spectra, _params.q, context.grid, _params)
        _residual = scfResidual(_gamma, _filling.nu, context, _spectra)

        _direction = _filling.densityMatrix(_spectra, context.grid.ell).dense() - _stack

        _slope = traceProduct(_operator, _direction) - _eps_P * tracePerCell(_direction)
        _curvature = _params.alpha * exchangeBilinear(_direction, _direction, context) if _params.alpha != 0 else 0.0

        _scale = max(1.0, abs(_energy.penalized_total))
        _beta = stepLength(_slope, _curvature, _scale)

        # Flat slope above the residual tolerance: the energy is at rounding
        # level, so the step is judged by the residual instead.
        _stalled = _beta == 0 and _residual > _params.scf_residual_tol

        if _stalled:
            _beta = 1.0

        _accepted = _gamma
        _accepted_energy = _energy
        _retraction_iters = 0

        for _halving in range(BACKTRACK_LIMIT + 1):
            if _beta == 0:
                break

            _relaxed = BlochDensityMatrix.fromDense(_stack + _beta * _direction, context.grid.ell)
            _candidate, _trace = theta(_relaxed, context, constants)
            _candidate_energy = energyCompute(_candidate, context, _eps_P)

            if _stalled:
                _descent = _candidate_energy.penalized_total <= _energy.penalized_total + STALL_TOLERANCE * _scale \
                    and candidateResidual(_candidate, context) < _residual
            else:
                _descent = _candidate_energy.penalized_total <= _energy.penalized_total + 1e-12 * abs(_energy.penalized_total)

            if _descent:
                _accepted = _candidate
                _accepted_energy = _candidate_energy
                _retraction_iters = _trace.iterations
                break

            _beta = _beta / 2
        else:
            _beta = 0.0

        if _accepted is _gamma:
            _beta = 0.0

        _delta_energy = _accepted_energy.penalized_total - _energy.penalized_total

        _history.append({
            "iteration": _iteration,
            "energy": _accepted_energy.total,
            "penalized_energy": _accepted_energy.penalized_total,
            "residual": _residual,
            "beta": _beta,
            "retraction_iters": _retraction_iters,
        })

        log.log("scf:%d energy:%.14e penalized:%.14e residual:%.6e beta:%.6e theta:%d" % (_iteration, _accepted_energy.total, _accepted_energy.penalized_total, _residual, _beta, _retraction_iters), 2)

        _gamma = _accepted
        _energy = _accepted_energy

        if callback is not None:
            callback(_iteration, _gamma)

        if abs(_delta_energy) <= _params.scf_energy_tol and _residual <= _params.scf_residual_tol:
            _converged = True
            break

        if _beta == 0:
            raise NoDescent("No descent at iteration %d with residual %.6e > %.6e." % (_iteration, _residual, _params.scf_residual_tol))

    if not _converged:
        raise MaxIterations("SCF did not converge in %d iterations." % _params.scf_max_iter)

    _spectra = spectraCompute(meanField(_gamma, context))
    _filling = aufbauFill(_spectra, _params.q, context.grid, _params)
    _residual = scfResidual(_gamma, _filling.nu, context, _spectra)

    _properties = {
        "trace_equals_q": abs(_gamma.trace() - _params.q) <= _params.occupation_tol,
        "residual_below_tol": _residual <= max(_params.scf_residual_tol, 1e-7),
        "nu_in_window": 0 <= _filling.nu <= _c_star,
    }

    log.log("scf:done iterations:%d energy:%.14e nu:%.12e residual:%.6e" % (_iteration, _energy.total, _filling.nu, _residual), 1)

    if strict and not all(_properties.values()):
        raise PropertyViolated("Solution properties failed: %s" % ", ".join([ _k for _k, _v in _properties.items() if not _v ]))

    return Solution(
        gamma = _gamma,
        nu = _filling.nu,
        filling = _filling,
        energies = _energy,
        history = _history,
        assumptions = _assumptions,
        constants = constants,
        eps_P = _eps_P,
        c_star = _c_star,
        c_star_bound = _c_bound,
        residual = _residual,
        converged = _converged,
        iterations = _iteration,
        properties = _properties,
    )


######################
# Reference
######################

def freeReferenceEnergy(params: ModelParams) -> float:
    """Ground state energy of the free model (z = 0, alpha = 0).

    The q N lowest positive dispersion values sqrt(c^4 + c^2 |xi + 2 pi k/ell|^2),
    two per mode, over the whole grid, averaged over the grid.
    """

    _grid = gridBuild(params)
    _basis = basisBuild(params)

    _values = numpy.concatenate([
        numpy.repeat(numpy.sqrt(params.c ** 4 + params.c ** 2 * numpy.sum(_basis.momenta(_xi) ** 2, axis = 1)), 2)
        for _xi in _grid.points
    ])

    _n_fill = params.q * _grid.size

    if _values.shape[0] < _n_fill:
        raise InsufficientStates("Only %d positive states for %d electrons on the grid." % (_values.shape[0], _n_fill))

    return float(numpy.sum(numpy.sort(_values)[:_n_fill]) / _grid.size)
