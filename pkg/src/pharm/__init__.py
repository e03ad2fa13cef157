"""Numerical study of p-harmonic maps into circles and tori as p increases to 2."""
__version__ = "0.1.0"
