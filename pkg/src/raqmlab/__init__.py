"""Simulation lab for a superdeterministic, rational-Hilbert-space Bell model."""

__version__ = "0.1.0"
