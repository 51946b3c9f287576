"""Hecke eigenvalues on values of binary quadratic forms: desk-scale verification tools."""

__version__ = "0.1.0"
