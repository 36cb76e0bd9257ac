"""Minimization of differences of submodular functions on integer lattices."""

__version__ = "0.1.0"
