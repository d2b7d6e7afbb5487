#!/usr/bin/env python3
"""Exchange singularity scaling.

Two normalized indicator functions of balls of radius lambda in the
Brillouin zone, dressed with band eigenvectors of the frozen mean-field
operator, give a trace-free direction h. Its quadratic form
Tr[V_h h] diverges like -lambda^-2 because of the exchange kernel;
the coefficient of the divergence is fitted and compared with a
quadrature of the pair-distance density of a ball.
"""
from .main import init, run, hLambdaBuild, fineGrid, radiiCompute, centersCompute
