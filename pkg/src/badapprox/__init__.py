"""Badly approximable systems of linear forms."""
__version__ = "0.1.0"
