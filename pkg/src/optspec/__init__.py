"""Optimal spectral initialization for phase retrieval: design, prediction and simulation."""

__version__ = "0.1.0"

from . import asymptotics, channels, design, montecarlo, numerics, preprocess  # noqa: F401
