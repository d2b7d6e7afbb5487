#!/usr/bin/env python3
"""Critical coupling report.

Only the branch 16 pi C_EE R of the critical constant is computable
from the estimated constants; the other branch collects proof constants
without a numeric recipe and is reported as not computed.
"""
from .main import init, run
