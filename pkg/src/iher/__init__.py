"""Imaginary hindsight experience replay at desk scale."""

__version__ = "0.1.0"
