#!/usr/bin/env python3
# test_constants.py
"""Constants, derived quantities and the coupling clauses."""

import numpy, pytest

from dfcrystal.errors import AssumptionViolated, InsufficientStates
from dfcrystal.model import ModelParams, gridBuild, basisBuild
from dfcrystal.constants import ConstantsEstimate, constantsEstimate, assumptionsCheck, cStar, OVERRIDE


def constants(params: ModelParams, **kwargs) -> ConstantsEstimate:
    _values = {"C_G": 2.0, "C_EE": 3.0, "C_W": 1.0, "C_Y": 1.0, "C_EE_prime": 1.0, "C_H": 1.0, "C_0": 1.0, "K": 1.0}
    _values.update(kwargs)
    return ConstantsEstimate(params = params, **_values)


######################
# Derived
######################

def test_kappa_arithmetic():
    _params = ModelParams(ell = 1.0, z = 1.0, q = 2, alpha = 0.5, c = 10.0, k_cut = 0, n_xi = 1)

    assert constants(_params).kappa == pytest.approx(0.5)


def test_derived_follow_primitives():
    _params = ModelParams(ell = 1.0, z = 1.0, q = 2, alpha = 0.1, c = 50.0, k_cut = 0, n_xi = 1)
    _c = constants(_params)

    _kappa = (2.0 * 1.0 + 3.0 * 0.1 * 2) / 50.0
    _lambda0 = 1 - max(1.0 * 1.0 / 50 + 1.0 * (0.1 / 50) * 2, (1.0 / 1.0) * (1.0 / 50) + 3.0 * (0.1 / 50) * 2)
    _A = 0.5 * (0.1 / 50) * 3.0 / numpy.sqrt(1 - _kappa) / numpy.sqrt(_lambda0)
    _R = (1.0 + 1.0) * 2 + 1.0

    _derived = _c.derived()

    assert _derived["kappa"] == pytest.approx(_kappa)
    assert _derived["lambda0"] == pytest.approx(_lambda0)
    assert _derived["A"] == pytest.approx(_A)
    assert _derived["R"] == pytest.approx(_R)
    assert _derived["L"] == pytest.approx(2 * _A * _R)
    assert _derived["M"] == pytest.approx(max((1 + _A * 2) / 2, 1 / (1 - 2 * _A * _R)))
    assert _derived["C_cri"] == pytest.approx(16 * numpy.pi * 3.0 * _R)


def test_override_recomputes_derived():
    _params = ModelParams(ell = 1.0, z = 1.0, q = 2, alpha = 0.1, c = 50.0, k_cut = 0, n_xi = 1)
    _c = constants(_params)
    _o = _c.withOverrides({"C_EE": 6.0, "R": 10.0})

    assert _o.C_EE == 6.0
    assert _o.R == 10.0
    assert _o.C_cri == pytest.approx(16 * numpy.pi * 6.0 * 10.0)
    assert _o.kappa > _c.kappa
    assert _o.provenance["C_EE"] == OVERRIDE


def test_unknown_override_is_rejected():
    _params = ModelParams(ell = 1.0, z = 0.0, q = 1, alpha = 0.0, c = 1.0, k_cut = 0, n_xi = 1)

    with pytest.raises(ValueError):
        constants(_params).withOverrides({"C_X": 1.0})


def test_linear_model_has_no_interaction_terms():
    _params = ModelParams(ell = 1.0, z = 0.0, q = 1, alpha = 0.0, c = 1.0, k_cut = 0, n_xi = 1)
    _c = constants(_params)

    assert _c.kappa == 0.0
    assert _c.lambda0 == 1.0
    assert _c.A == 0.0
    assert _c.L == 0.0


######################
# Eigenvalue window
######################

def test_c_star_free():
    _params = ModelParams(ell = 2 * numpy.pi, z = 0.0, q = 1, alpha = 0.0, c = 1.0, k_cut = 1, n_xi = 1)
    _value, _bound = cStar(2, _params, 1.0, 1.0, basisBuild(_params), gridBuild(_params))

    assert _value == pytest.approx(1.0)
    assert _value <= _bound


def test_c_star_needs_enough_branches():
    _params = ModelParams(ell = 2 * numpy.pi, z = 0.0, q = 2, alpha = 0.0, c = 1.0, k_cut = 0, n_xi = 1)

    with pytest.raises(InsufficientStates):
        cStar(3, _params, 1.0, 1.0, basisBuild(_params), gridBuild(_params))


######################
# Estimation
######################

def test_estimates_are_deterministic(smallContext):
    _a = constantsEstimate(smallContext, seed = 3, probes = 3)
    _b = constantsEstimate(smallContext, seed = 3, probes = 3)

    assert _a.dict() == _b.dict()


def test_estimates_are_positive(interactingConstants):
    for _name in ["C_G", "C_EE", "C_W", "C_Y", "C_H", "K"]:
        _value = getattr(interactingConstants, _name)
        assert numpy.isfinite(_value) and _value > 0


def test_overrides_are_recorded(smallContext):
    _c = constantsEstimate(smallContext, probes = 2, overrides = {"C_G": 0.5, "probes": 2})

    assert _c.C_G == 0.5
    assert _c.provenance["C_G"] == OVERRIDE
    assert _c.provenance["C_EE"] != OVERRIDE


def test_strict_rejects_large_kappa(smallContext):
    with pytest.raises(AssumptionViolated):
        constantsEstimate(smallContext, probes = 2, overrides = {"C_G": 100.0}, strict = True)


######################
# Assumptions
######################

def test_clauses_and_slacks(interactingContext, interactingConstants):
    _report = assumptionsCheck(interactingConstants, interactingContext)
    _p = interactingContext.params
    _c = interactingConstants

    assert [ _clause.name for _clause in _report.clauses ] == ["kappa", "rho_window", "speed_of_light", "critical_coupling"]

    _half = 0.5 * _p.alpha_c * _c.C_EE * _p.q

    assert _report.clause("kappa").slack == pytest.approx(1 - _half - _c.kappa)
    assert _report.clause("speed_of_light").slack == pytest.approx(_p.c - 2 * (_c.C_G * _p.z + _c.C_EE * _p.q))
    assert _report.clause("critical_coupling").slack == pytest.approx(4 * numpy.pi / _c.C_cri * _p.c - _p.alpha)
    assert _report.passed == all([ _clause.holds for _clause in _report.clauses ])


def test_slow_light_fails_speed_clause(smallContext):
    _c = constantsEstimate(smallContext, probes = 2, overrides = {"C_G": 10.0})
    _report = assumptionsCheck(_c, smallContext)

    assert not _report.clause("speed_of_light").holds
    assert not _report.light_fast
    assert not _report.passed
