#!/usr/bin/env python3
# test_retraction.py
"""Fixed-point retraction onto the constrained set."""

import numpy, pytest

from dfcrystal.errors import InvalidState
from dfcrystal.retraction import applyT, theta, membershipCheck, gammaPlusDeviation, projectorDifferenceBound

from conftest import randomState


def test_t_rejects_overfilled_states(linearContext):
    _gamma = randomState(linearContext, 3, occupation = 1.0)

    with pytest.raises(InvalidState):
        applyT(_gamma, linearContext)


def test_t_is_projection_without_interaction(linearContext):
    _gamma = randomState(linearContext, 2, seed = 3)

    _once, _ = applyT(_gamma, linearContext)
    _twice, _ = applyT(_once, linearContext)

    assert numpy.allclose(_once.dense(), _twice.dense(), atol = 1e-12)
    assert _once.trace() <= _gamma.trace() + 1e-12


def test_theta_stops_after_one_productive_step(linearContext, linearConstants):
    _gamma = randomState(linearContext, 2, seed = 4)
    _result, _trace = theta(_gamma, linearContext, linearConstants)

    assert _trace.converged
    assert _trace.productive == 1
    assert gammaPlusDeviation(_result, linearContext) < 1e-10


def test_theta_converges_with_interaction(interactingContext, interactingConstants):
    _gamma = randomState(interactingContext, 2, seed = 5)
    _result, _trace = theta(_gamma, interactingContext, interactingConstants)

    assert _trace.converged
    assert _trace.max_ratio < 1
    assert gammaPlusDeviation(_result, interactingContext) < 1e-6
    assert len(_trace.rows()) == _trace.iterations


def test_membership_summands(interactingContext, interactingConstants):
    _gamma = randomState(interactingContext, 2, seed = 6)
    _report = membershipCheck(_gamma, interactingContext, interactingConstants)

    assert _report.value == pytest.approx(_report.first + _report.second)
    assert _report.margin == pytest.approx(_report.R - _report.value)
    assert _report.member == (_report.value < _report.R)


def test_projector_difference_vanishes_for_equal_states(interactingContext, interactingConstants):
    _gamma = randomState(interactingContext, 2, seed = 7)
    _lhs, _rhs = projectorDifferenceBound(_gamma, _gamma, interactingContext, interactingConstants)

    assert _lhs == pytest.approx(0.0, abs = 1e-10)
    assert _rhs == pytest.approx(0.0, abs = 1e-10)
