#!/usr/bin/env python
# -*- coding: utf-8 -*-
# setup.py
"""Install script for this package."""

import os
from setuptools import setup, find_packages
from _version import Version


VERSION = str(Version(os.popen("git describe --tags --dirty --always").read()))

if os.path.exists("VERSION"):
    STORED = open("VERSION", "r").read().strip()

    # Successive dirty builds of one commit get increasing dev numbers
    if VERSION.endswith(".dev") and STORED.startswith(VERSION) and STORED[len(VERSION):].isdigit():
        VERSION = VERSION + str(int(STORED[len(VERSION):]) + 1)
    elif VERSION.endswith(".dev"):
        VERSION = VERSION + "0"
elif VERSION.endswith(".dev"):
    VERSION = VERSION + "0"


with open("VERSION", "w") as file:
    file.write(VERSION)


# Also store the version to be seen from the code
with open("./dfcrystal/version.py", "w") as file:
    file.write("__version__ = '%s'" % VERSION)


setup(
    name = "dfcrystal",
    version = VERSION,
    description = ("Plane-wave simulator of the periodic Dirac-Fock model with retraction-based SCF and diagnostics."),
    license = "GPLv3",
    keywords = "Dirac-Fock crystal Bloch plane-wave SCF",
    packages=find_packages(exclude=["tests"]),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3 :: Only",
        "Topic :: Scientific/Engineering :: Physics",
        "Typing :: Typed",
    ],
    install_requires=["scipy>=1.6.0", "numpy>=1.20.0", "tqdm"],
    python_requires='>=3.7',
    extras_require={
        "test": "pytest"
    },
    scripts=['bin/dfcrystal'],
)
