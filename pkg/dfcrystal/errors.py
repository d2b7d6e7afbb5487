#!/usr/bin/env python3
# errors.py
"""Exceptions raised by dfcrystal.

Configuration problems use the builtin ValueError; everything
below signals a numerical or mathematical condition.
"""


class DFCrystalError(Exception):
    """Base class of the package errors."""
    pass


class ZeroModeAmbiguity(DFCrystalError):
    """An eigenvalue of D_{gamma,xi} is too close to zero to split P+/P-."""

    def __init__(self, fiber: int, eigenvalue: float):
        self.fiber = fiber
        self.eigenvalue = eigenvalue
        super(ZeroModeAmbiguity, self).__init__("Eigenvalue %e at fiber %d is within the zero-mode tolerance." % (eigenvalue, fiber))


class EigensolverError(DFCrystalError):
    """Dense eigensolver did not converge."""

    def __init__(self, fiber: int, message: str = ""):
        self.fiber = fiber
        super(EigensolverError, self).__init__("Eigensolver failed at fiber %d. %s" % (fiber, message))


class ResonanceError(DFCrystalError):
    """A non-singular kernel denominator vanishes on the grid."""
    pass


class InvalidState(DFCrystalError):
    """Density matrix violates 0 <= gamma <= 1, orthonormality or the trace bound."""
    pass


class NonContraction(DFCrystalError):
    """Retraction steps stopped contracting."""
    pass


class MaxIterations(DFCrystalError):
    """Iteration limit reached before convergence."""
    pass


class NoDescent(DFCrystalError):
    """Damped SCF step found no descent while the residual is above tolerance."""
    pass


class InsufficientStates(DFCrystalError):
    """Positive spectrum cannot hold q electrons per cell."""
    pass


class HypothesisViolated(DFCrystalError):
    """Hypothesis of the expansion check does not hold."""
    pass


class EmptyBall(DFCrystalError):
    """A ball of the h^lambda construction contains no grid point."""
    pass


class AssumptionViolated(DFCrystalError):
    """Coupling assumptions fail in strict mode."""
    pass


class PropertyViolated(DFCrystalError):
    """A strict-mode property assertion failed."""
    pass


class CheckpointError(DFCrystalError):
    """Checkpoint is missing or does not match the model."""
    pass


class CheckpointMissing(CheckpointError):
    """A required checkpoint file does not exist."""
    pass
