"""Localized defect modes bifurcating from spectral band edges of periodic 1D Schrodinger operators."""
__version__ = "0.1.0"
