#!/usr/bin/env python3
# __init__.py
"""Initialize script for 'dfcrystal' package."""
######################
# Imports & Globals
######################

# Version of the package
from .version import __version__


######################
# Package
######################

from .main import execute, configurationLoad, configurationValidate
