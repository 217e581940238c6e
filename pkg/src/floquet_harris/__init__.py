"""Floquet eigenelements and Harris-type certificates for periodic linear semiflows."""

__version__ = "0.1.0"
