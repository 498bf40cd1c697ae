"""Temporal coherence analysis for composite web archive mementos."""

__version__ = "0.1.0"
