"""Numerical laboratory for random band matrices, Dyson Brownian motion
and eigenvector moment flow observables."""

__version__ = "0.1.0"
