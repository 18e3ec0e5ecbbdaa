"""Reconstruction of the tangent bundle of the projective plane from tropical data."""

__version__ = "0.1.0"
