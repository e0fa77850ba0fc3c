"""Relational rule learning directly over dirty data, using matching
dependencies and conditional functional dependencies as repair knowledge."""

__version__ = "0.1.0"
