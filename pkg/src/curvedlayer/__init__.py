"""Bound states of thin curved quantum layers: geometry, asymptotics and solvers."""

__version__ = "0.1.0"
