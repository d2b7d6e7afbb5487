#!/usr/bin/env python3
# log.py
"""Shared logging target of the core modules.

Plugins hold their own LOGFILE/VERBOSITY set by 'init()';
the core (operators, solver, retraction) writes here.
"""
######################
# Imports & Globals
######################

import sys

# Thread lock for log file
from threading import Lock

# Typing
from typing import TextIO


LOGFILE = sys.stdout
VERBOSITY = 1
FILELOCK = Lock()


######################
# Functions
######################

def logfileSet(logfile: TextIO = sys.stdout, logging_verbosity: int = 1) -> None:
    """Sets the logging target.

    Arguments:
    logfile -- file descriptor for logging, TextIO, default sys.stdout
    logging_verbosity -- index for verbosity of the logger, int, default 1
    """
    global LOGFILE, VERBOSITY

    LOGFILE = logfile
    VERBOSITY = logging_verbosity


def log(message: str, level: int = 1) -> None:
    """Writes a 'key:value' record when verbosity allows."""

    if VERBOSITY < level:
        return

    with FILELOCK:
        print (message, file=LOGFILE)
        LOGFILE.flush()


def progressDisabled() -> bool:
    """Whether tqdm progress bars should stay hidden."""
    return VERBOSITY < 2
