"""Dislocation-density delay differential equation: coefficients, reference
solutions, method-of-steps integrators and an error harness."""

__version__ = "0.1.0"
