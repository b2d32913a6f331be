"""Hyperbolic sigma models: geometry, samplers, lattice Monte Carlo, exact chain and spectral checks."""

__version__ = "0.1.0"
