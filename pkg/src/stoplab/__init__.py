"""Optimal stopping, simulation and model comparison for the repeated secretary problem."""

__version__ = "0.1.0"
