"""Resolvent kernels, quantum noise commutators and a two-element quantum antenna."""

__version__ = "0.1.0"
