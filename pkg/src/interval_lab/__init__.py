"""Trace-driven cache simulation and LLC-aware simulation-interval selection."""

__version__ = "0.1.0"
