"""gaplab: numerical laboratory for spectral-gap thresholds of
frustration-free local Hamiltonians on chains and finite-dimensional lattices."""

__version__ = "0.1.0"
