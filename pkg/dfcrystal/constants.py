#!/usr/bin/env python3
# constants.py
"""Operator-bound constants and the coupling assumptions.

The constants (C_G, C_EE, C_W, C_Y, C'_EE, C_H, C_0, K) are
estimated on the truncated basis. Operator norms are exact there,
bilinear bounds are maximized over random probe density matrices,
so every value is a lower-bound estimate of the continuum constant.
Each value may be overridden by the user; the provenance of every
constant is recorded.
"""
######################
# Imports & Globals
######################

import numpy

import scipy.linalg

from dataclasses import dataclass, field, replace

# Progress bar over probes
from tqdm import tqdm

# Typing
from typing import Dict, List, Tuple

from dfcrystal.model import ModelParams, BrillouinGrid, PlaneWaveBasis
from dfcrystal.errors import AssumptionViolated, InsufficientStates
from dfcrystal.operators import Context, interactionParts, spectraCompute, BlochOperator, coulombSymbol, fiberMap
from dfcrystal.states import BlochDensityMatrix, normsCompute

import dfcrystal.log as log


ESTIMATED = "estimated-on-truncated-basis"
OVERRIDE = "user-override"
DEFAULT = "default"

PRIMITIVES = ["C_G", "C_EE", "C_W", "C_Y", "C_EE_prime", "C_H", "C_0", "K", "C_M"]


# Parameters
from dfcrystal.parameter import *
P = ParameterList()
P.createAdd("C_G", None, float, "Override of the Coulomb bound ||G (1 - Delta)^-1/2||.", "constants", bounds=(0.0, float("inf")))
P.createAdd("C_EE", None, float, "Override of the bound ||V_gamma||_Y <= C_EE ||gamma||_{X cap Y}.", "constants", bounds=(0.0, float("inf")))
P.createAdd("C_W", None, float, "Override of the exchange bound in the convolution norm.", "constants", bounds=(0.0, float("inf")))
P.createAdd("C_Y", None, float, "Override of sup_xi avg 1/|xi - xi'|^2.", "constants", bounds=(0.0, float("inf")))
P.createAdd("C_EE_prime", None, float, "Override of the lower bound constant of V_gamma.", "constants", bounds=(0.0, float("inf")))
P.createAdd("C_H", None, float, "Override of the Kato-type constant of G.", "constants", bounds=(0.0, float("inf")))
P.createAdd("C_0", None, float, "Override of the constant in G >= -C_0/ell.", "constants", bounds=(0.0, float("inf")))
P.createAdd("K", None, float, "Override of the H^1 bound of the filled eigenfunctions.", "constants", bounds=(0.0, float("inf")))
P.createAdd("C_M", 1.0, float, "Constant C_M of the radius R = (K + C_M) q + C_Y.", "constants", bounds=(0.0, float("inf")))
P.createAdd("R", None, float, "Override of the radius R of the contraction set.", "constants", bounds=(0.0, float("inf")))
P.createAdd("probes", 32, int, "Number of random probe density matrices.", "constants", bounds=(1, 100000))


######################
# ConstantsEstimate
######################

@dataclass(frozen=True)
class ConstantsEstimate:
    """Primitive constants with provenance; derived constants are properties."""

    params: ModelParams
    C_G: float
    C_EE: float
    C_W: float
    C_Y: float
    C_EE_prime: float
    C_H: float
    C_0: float
    K: float
    C_M: float = 1.0
    R_override: float = None
    provenance: Dict[str, str] = field(default_factory = dict)


    @property
    def kappa(self) -> float:
        _p = self.params
        return (self.C_G * _p.z + self.C_EE * _p.alpha * _p.q) / _p.c

    @property
    def lambda0(self) -> float:
        _p = self.params
        return 1 - max(self.C_H * _p.z_c + self.C_EE_prime * _p.alpha_c * _p.q, (self.C_0 / _p.ell) * _p.z_c + self.C_EE * _p.alpha_c * _p.q)

    @property
    def A(self) -> float:
        _p = self.params

        if _p.alpha_c == 0 or self.C_EE == 0:
            return 0.0

        if self.kappa >= 1 or self.lambda0 <= 0:
            return float("inf")

        return 0.5 * _p.alpha_c * self.C_EE * (1 - self.kappa) ** -0.5 * self.lambda0 ** -0.5

    @property
    def R(self) -> float:
        if self.R_override is not None:
            return self.R_override

        return (self.K + self.C_M) * self.params.q + self.C_Y

    @property
    def L(self) -> float:
        return 2 * self.A * self.R

    @property
    def M(self) -> float:
        if self.L >= 1:
            return float("inf")

        return max((1 + self.A * self.params.q) / 2, 1 / (1 - self.L))

    @property
    def C_cri(self) -> float:
        """Computable branch 16 pi C_EE R of the critical constant."""
        return 16 * numpy.pi * self.C_EE * self.R

    @property
    def alpha_c_threshold(self) -> float:
        """Upper bound 4 pi / C_cri on alpha/c."""
        return 4 * numpy.pi / self.C_cri if self.C_cri > 0 else float("inf")


    def derived(self) -> Dict[str, float]:
        return {
            "kappa": self.kappa,
            "lambda0": self.lambda0,
            "A": self.A,
            "L": self.L,
            "M": self.M,
            "R": self.R,
            "C_cri": self.C_cri,
            "alpha_c_threshold": self.alpha_c_threshold,
        }


    def withOverrides(self, overrides: Dict[str, float]) -> "ConstantsEstimate":
        """Copy with user values replacing estimated constants."""

        _changes = {}
        _provenance = dict(self.provenance)

        for _name, _value in overrides.items():
            if _value is None or _name == "probes":
                continue

            if _name == "R":
                _changes["R_override"] = float(_value)
            elif _name in PRIMITIVES:
                _changes[_name] = float(_value)
            else:
                raise ValueError("Unknown constant '%s'." % _name)

            _provenance[_name] = OVERRIDE

        return replace(self, provenance = _provenance, **_changes)


    def dict(self) -> Dict[str, any]:
        _values = { _name: getattr(self, _name) for _name in PRIMITIVES }
        _values["R_override"] = self.R_override

        return {"primitives": _values, "provenance": dict(self.provenance), "derived": self.derived()}


######################
# Eigenvalue windows
######################

def sigmaWindow(m_norm: float, params: ModelParams, C_G: float, C_EE: float) -> float:
    """Sigma(k) = 2 pi^2 (1 + |m|)^2 / ell^2 + (C_G z + C_EE q) 2 pi (1 + |m|) / ell."""
    _s = 1 + m_norm
    return 2 * numpy.pi ** 2 * _s ** 2 / params.ell ** 2 + (C_G * params.z + C_EE * params.q) * 2 * numpy.pi * _s / params.ell


def cStar(k: int, params: ModelParams, C_G: float, C_EE: float, basis: PlaneWaveBasis, grid: BrillouinGrid) -> Tuple[float, float]:
    """Upper eigenvalue window c*(k) and its analytic over-bound.

    c*(k) = sup_xi d+_k(xi) + (C_G z + alpha C_EE q) sigma_k((1 - Delta_xi)^1/2),
    where d+_k is the k-th positive free Dirac eigenvalue and sigma_k
    the matching |xi + 2 pi m/ell| (every mode carries two positive
    branches).

    Arguments:
    k -- 1-based index of the eigenvalue, int
    params -- model parameters, ModelParams
    C_G -- Coulomb constant, float
    C_EE -- interaction constant, float
    basis -- plane-wave basis, PlaneWaveBasis
    grid -- Brillouin zone grid, BrillouinGrid

    Returns:
    c_star -- sup over the grid of the window, float
    bound -- sup over the grid of c^2 + Sigma(k), float

    Raises:
    InsufficientStates -- when k exceeds the number of positive branches
    """

    if k < 1 or k > 2 * basis.n_modes:
        raise InsufficientStates("Eigenvalue index %d outside of 1..%d positive branches." % (k, 2 * basis.n_modes))

    _prefactor = C_G * params.z + params.alpha * C_EE * params.q
    _m_norms = numpy.sqrt(numpy.sum(basis.modes ** 2, axis = 1))

    _value = -float("inf")
    _bound = -float("inf")

    for _xi in grid.points:
        _p = numpy.sqrt(numpy.sum(basis.momenta(_xi) ** 2, axis = 1))
        _order = numpy.argsort(_p, kind = "stable")

        _mode = _order[(k - 1) // 2]
        _pk = _p[_mode]

        _value = max(_value, numpy.sqrt(params.c ** 4 + params.c ** 2 * _pk ** 2) + _prefactor * _pk)
        _bound = max(_bound, params.c ** 2 + sigmaWindow(_m_norms[_mode], params, C_G, C_EE))

    return float(_value), float(_bound)


######################
# Estimation
######################

def _probe(context: Context, rank: int, rng: numpy.random.Generator) -> BlochDensityMatrix:
    """Random projector of the given rank on every fiber."""

    _n_b = context.basis.n_b
    _rank = min(rank, _n_b)

    _orbitals = []

    for _i in range(context.grid.size):
        _z = rng.standard_normal((_n_b, _rank)) + 1j * rng.standard_normal((_n_b, _rank))
        _q, _ = numpy.linalg.qr(_z)
        _orbitals.append(_q)

    return BlochDensityMatrix(_orbitals, [ numpy.ones(_rank) ] * context.grid.size, context.grid.ell)


def coulombConstants(context: Context) -> Tuple[float, float]:
    """C_G and C_H as exact operator norms on the truncated basis.

    Returns:
    C_G -- max_xi ||G (1 - Delta_xi)^-1/2||, float
    C_H -- max_xi lambda_max((1 - Delta_xi)^-1/4 G (1 - Delta_xi)^-1/4), float
    """

    _basis = context.basis
    _g = coulombSymbol(_basis)[_basis.diff_index]

    _C_G = 0.0
    _C_H = 0.0

    for _xi in context.grid.points:
        _p2 = numpy.sum(_basis.momenta(_xi) ** 2, axis = 1)

        _half = (1 + _p2) ** -0.5
        _quarter = (1 + _p2) ** -0.25

        _C_G = max(_C_G, float(numpy.max(scipy.linalg.svdvals(_g * _half[None, :]))))
        _C_H = max(_C_H, float(scipy.linalg.eigvalsh(_quarter[:, None] * _g * _quarter[None, :])[-1]))

    return _C_G, max(_C_H, 0.0)


def coulombFloor(context: Context, points: int = None) -> float:
    """C_0 = max(0, -ell min_x G_trunc(x)) from a real-space grid."""

    _basis = context.basis
    _g = coulombSymbol(_basis)

    if not numpy.any(_g):
        return 0.0

    _n = points if points is not None else max(8, 2 * _basis.diff_side)
    _axis = numpy.arange(_n) / _n
    _x = numpy.stack(numpy.meshgrid(_axis, _axis, _axis, indexing = "ij"), axis = -1).reshape((-1, 3))

    _values = numpy.cos(2 * numpy.pi * _x @ _basis.shifts.T) @ _g

    return max(0.0, -_basis.ell * float(numpy.min(_values)))


def probeConstants(context: Context, probes: int = 32, seed: int = 0) -> Tuple[float, float, float]:
    """C_EE, C_W and C'_EE as maxima of the bound ratios over random probes.

    Probes alternate rank 1 and rank q projectors with random
    orthonormal orbitals (QR of complex Gaussian matrices).

    Returns:
    C_EE -- max ||V_gamma||_Y / ||gamma||_{X cap Y}, float
    C_W -- max_xi ||W_gamma,xi|| / ||gamma||_{X cap Y(xi)}, float
    C_EE_prime -- max_xi (-lambda_min(V_gamma,xi)) / ||gamma||_{S11 cap Y}, float
    """

    _rng = numpy.random.default_rng(seed)
    _q = context.params.q

    _C_EE = 0.0
    _C_W = 0.0
    _C_EE_prime = 0.0

    for _i in tqdm(range(probes), desc = "probes", leave = False, disable = log.progressDisabled()):
        _gamma = _probe(context, 1 if _i % 2 == 0 else _q, _rng)
        _stack = _gamma.dense()

        _, _hartree, _exchange = interactionParts(_stack, context)
        _potential = _hartree[None, :, :] - _exchange

        _norms = normsCompute(_stack, context)
        _s11 = float(numpy.mean([ numpy.sum(_f) for _f in _gamma.occupations ]))

        _v_norm = numpy.asarray(fiberMap(lambda j: float(numpy.linalg.norm(_potential[j], 2)), range(_stack.shape[0])))
        _w_norm = numpy.asarray(fiberMap(lambda j: float(numpy.linalg.norm(_exchange[j], 2)), range(_stack.shape[0])))
        _v_min = numpy.asarray(fiberMap(lambda j: float(scipy.linalg.eigvalsh(_potential[j])[0]), range(_stack.shape[0])))

        _C_EE = max(_C_EE, float(numpy.max(_v_norm)) / _norms.combined)
        _C_W = max(_C_W, float(numpy.max(_w_norm / numpy.maximum(_norms.norm_X, _norms.fiber_Y_conv))))
        _C_EE_prime = max(_C_EE_prime, float(numpy.max(-_v_min)) / max(_s11, _norms.norm_Y))

        log.log("probe:%d rank:%d C_EE:%.12e C_W:%.12e C_EE_prime:%.12e" % (_i, _gamma.ranks[0], _C_EE, _C_W, _C_EE_prime), 3)

    return _C_EE, _C_W, max(_C_EE_prime, 0.0)


def eigenfunctionBound(context: Context, C_G: float, C_EE: float) -> float:
    """K = max ||(1 - Delta_xi)^1/2 psi|| over eigenvectors of D - zG in (0, c^2 + Sigma(q + 1)]."""

    _params = context.params
    _basis = context.basis

    try:
        _, _window = cStar(_params.q + 1, _params, C_G, C_EE, _basis, context.grid)
    except InsufficientStates:
        _m_norms = numpy.sqrt(numpy.sum(_basis.modes ** 2, axis = 1))
        _window = _params.c ** 2 + sigmaWindow(float(numpy.max(_m_norms)), _params, C_G, C_EE)

    _K = 0.0

    for _s, _xi in zip(spectraCompute(BlochOperator(matrices = context.external)), context.grid.points):
        _inside = (_s.eigenvalues > 0) & (_s.eigenvalues <= _window)

        if not numpy.any(_inside):
            continue

        _weights = 1 + _basis.momentumSquared(_xi)
        _h1 = numpy.sqrt(_weights @ numpy.abs(_s.eigenvectors[:, _inside]) ** 2)

        _K = max(_K, float(numpy.max(_h1)))

    return _K if _K > 0 else 1.0


def constantsEstimate(context: Context, seed: int = 0, probes: int = 32, overrides: Dict[str, float] = None, strict: bool = False) -> ConstantsEstimate:
    """Estimates all constants on the truncated basis.

    Arguments:
    context -- operator context, Context
    seed -- seed of the probe generator, int, default 0
    probes -- number of probe density matrices, int, default 32
    overrides -- user values of constants (keys of the 'constants' block), dict, default None
    strict -- raise when kappa >= 1, bool, default False

    Returns:
    constants -- estimates with provenance, ConstantsEstimate

    Raises:
    AssumptionViolated -- in strict mode when kappa >= 1
    """

    _params = context.params
    _overrides = { _k: _v for _k, _v in (overrides or {}).items() if _v is not None and _k != "probes" }

    _C_G, _C_H = coulombConstants(context)
    _C_0 = coulombFloor(context)
    _C_Y = context.weights.kernelAverage()

    if all([ _name in _overrides for _name in ["C_EE", "C_W", "C_EE_prime"] ]):
        _C_EE, _C_W, _C_EE_prime = _overrides["C_EE"], _overrides["C_W"], _overrides["C_EE_prime"]
    else:
        _C_EE, _C_W, _C_EE_prime = probeConstants(context, probes, seed)

    if "K" in _overrides:
        _K = _overrides["K"]
    else:
        _K = eigenfunctionBound(context, _overrides.get("C_G", _C_G), _overrides.get("C_EE", _C_EE))

    _constants = ConstantsEstimate(
        params = _params,
        C_G = _C_G, C_EE = _C_EE, C_W = _C_W, C_Y = _C_Y, C_EE_prime = _C_EE_prime,
        C_H = _C_H, C_0 = _C_0, K = _K, C_M = 1.0,
        provenance = { _name: ESTIMATED for _name in PRIMITIVES if _name != "C_M" },
    )
    _constants = replace(_constants, provenance = {**_constants.provenance, **{"C_M": DEFAULT}})
    _constants = _constants.withOverrides(_overrides)

    log.log("constants:%s" % " ".join([ "%s=%.12e" % (_k, getattr(_constants, _k)) for _k in PRIMITIVES ]), 1)
    log.log("derived:%s" % " ".join([ "%s=%.12e" % (_k, _v) for _k, _v in _constants.derived().items() ]), 1)

    if strict and _constants.kappa >= 1:
        raise AssumptionViolated("kappa = %f >= 1 with the estimated constants." % _constants.kappa)

    return _constants


######################
# Assumptions
######################

@dataclass
class Clause:
    name: str
    holds: bool
    slack: float
    detail: str = ""


@dataclass
class AssumptionReport:
    """Verdict of every coupling clause with its numeric slack."""

    clauses: List[Clause]
    c_star: float
    c_star_bound: float

    @property
    def passed(self) -> bool:
        return all([ _c.holds for _c in self.clauses ])

    @property
    def coupling_small(self) -> bool:
        """Clauses (1) and (2)."""
        return all([ _c.holds for _c in self.clauses[:2] ])

    @property
    def light_fast(self) -> bool:
        """Clauses (3) and (4)."""
        return all([ _c.holds for _c in self.clauses[2:] ])

    def clause(self, name: str) -> Clause:
        return [ _c for _c in self.clauses if _c.name == name ][0]

    def dict(self) -> Dict[str, any]:
        return {
            "passed": self.passed,
            "coupling_small": self.coupling_small,
            "light_fast": self.light_fast,
            "c_star": self.c_star,
            "c_star_bound": self.c_star_bound,
            "clauses": [ {"name": _c.name, "holds": _c.holds, "slack": _c.slack, "detail": _c.detail} for _c in self.clauses ],
        }


def assumptionsCheck(constants: ConstantsEstimate, context: Context) -> AssumptionReport:
    """Checks the four coupling clauses.

    (1) kappa < 1 - (alpha_c/2) C_EE q
    (2) a radius rho exists with max(1, lower) < rho < upper
    (3) c >= 2 (C_G z + C_EE q)
    (4) alpha <= (4 pi / C_cri) c, computable branch of C_cri

    Returns:
    report -- clauses with slacks, AssumptionReport
    """

    _p = context.params
    _c = constants

    _c_star, _c_bound = cStar(_p.q + 1, _p, _c.C_G, _c.C_EE, context.basis, context.grid)

    _half = 0.5 * _p.alpha_c * _c.C_EE * _p.q

    # (1)
    _slack1 = 1 - _half - _c.kappa

    # (2)
    _denominator = 1 - _c.kappa - _half

    if _denominator > 0:
        _lower = numpy.sqrt(max(_c_star * _p.q / (_denominator * _p.c ** 2), 1.0) * _p.q)
    else:
        _lower = float("inf")

    if _c.kappa >= 1 or _c.lambda0 <= 0:
        _upper = 0.0
    elif _p.alpha_c == 0:
        _upper = float("inf")
    else:
        _upper = numpy.sqrt((1 - _c.kappa) * _c.lambda0) / _p.alpha_c

    _floor = max(1.0, _lower)
    _slack2 = _upper - _floor if numpy.isfinite(_floor) else -float("inf")

    # (3)
    _slack3 = _p.c - 2 * (_c.C_G * _p.z + _c.C_EE * _p.q)

    # (4)
    _slack4 = _c.alpha_c_threshold * _p.c - _p.alpha

    _clauses = [
        Clause("kappa", bool(_slack1 > 0), float(_slack1), "kappa=%.6e half_term=%.6e" % (_c.kappa, _half)),
        Clause("rho_window", bool(_slack2 > 0), float(_slack2), "lower=%.6e upper=%.6e" % (_floor, _upper)),
        Clause("speed_of_light", bool(_slack3 >= 0), float(_slack3), "2(C_G z + C_EE q)=%.6e" % (_p.c - _slack3)),
        Clause("critical_coupling", bool(_slack4 >= 0), float(_slack4), "C_cri=%.6e threshold=%.6e" % (_c.C_cri, _c.alpha_c_threshold)),
    ]

    for _clause in _clauses:
        log.log("assumption:%s holds:%s slack:%.12e" % (_clause.name, _clause.holds, _clause.slack), 1)

    return AssumptionReport(clauses = _clauses, c_star = _c_star, c_star_bound = _c_bound)
