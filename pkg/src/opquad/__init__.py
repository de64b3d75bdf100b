"""Quadrature rules and integral approximations from finite matrices of
multiplication operators over arbitrary (non-orthonormal) bases."""

__version__ = "0.1.0"
