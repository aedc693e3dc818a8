"""Numerical toolkit for the three-body point-interaction model with two identical fermions."""
__version__ = "0.1.0"
