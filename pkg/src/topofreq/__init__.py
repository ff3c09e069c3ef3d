"""Numerical laboratory for topological frequency conversion on a driven qubit."""

__version__ = "0.1.0"
