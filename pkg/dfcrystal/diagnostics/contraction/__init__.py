#!/usr/bin/env python3
"""Contraction of the retraction.

theta is run from a relaxed starting point and the ratios of
consecutive step norms are compared with the contraction rate
L(alpha, c). Idempotence of theta, the distance of the result
from Gamma+ and the Lipschitz bound of the positive projector are
reported as well.
"""
from .main import init, run
