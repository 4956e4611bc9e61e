"""Pseudo-spectral Navier-Stokes solving, inequality auditing, and exact exponent bookkeeping."""

__version__ = "0.1.0"
