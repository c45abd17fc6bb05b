"""Adaptive POD-Galerkin reduction for periodic advection-diffusion problems."""

__version__ = "0.1.0"
