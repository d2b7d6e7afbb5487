#!/usr/bin/env python3
"""Fermi shell classification.

The occupations of a state are read in the eigenbasis of its
mean-field operator. The block at the Fermi level is classified as
empty, filled or fractional, and the deviation of the state from a
projector is reported per fiber.
"""
from .main import init, run
