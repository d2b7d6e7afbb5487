#!/usr/bin/env python3
"""Second-order expansion of the retracted energy.

This diagnostic moves a solved state along an admissible direction h
(P+ h P+ = h), retracts every point with theta and compares the
penalized energy with its first and second order model. The residual
is divided by t^2 alpha_c^2 and compared with the a priori error bound.
"""
from .main import init, run
