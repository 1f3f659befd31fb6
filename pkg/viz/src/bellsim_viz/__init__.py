"""Batch figure generation from bellsim report files."""

__version__ = "0.1.0"
