"""Spherical analysis on the free two-step nilpotent Lie groups N_{v,2}."""
from . import areafn, group, matpolar, multiplier, plancherel, specfun, spherical

__all__ = ["specfun", "group", "matpolar", "spherical", "plancherel", "areafn", "multiplier"]
__version__ = "0.1.0"
