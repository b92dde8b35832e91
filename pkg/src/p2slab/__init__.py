"""Numerical laboratory for noisy analogue quantum simulation with
Trotter, Floquet-Magnus and Schrieffer-Wolff mappings."""

__version__ = "0.1.0"
