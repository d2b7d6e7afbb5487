#!/usr/bin/env python3
"""Band continuity along a path in the Brillouin zone.

The state is frozen on the solver grid and the positive eigenvalues
of D_{gamma,xi} are sampled along a polyline. Empirical Hoelder
moduli are reported per band and steps much steeper than the
typical one are flagged.
"""
from .main import init, run
