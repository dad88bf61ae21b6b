"""Multicomplex-step sensitivity analysis for FDTD electromagnetics."""

__version__ = "0.1.0"
