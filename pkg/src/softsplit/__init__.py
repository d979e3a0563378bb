"""Simulator and learning harness for functional-split selection during
soft handovers between edge clouds."""

__version__ = "0.1.0"
