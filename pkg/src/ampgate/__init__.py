"""Simulation and analysis of parametrically amplified spin-spin gates."""

__version__ = "0.1.0"
