"""Simulated mobile typing with word suggestions."""

__version__ = "0.1.0"
