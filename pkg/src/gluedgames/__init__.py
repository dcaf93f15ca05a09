"""Glued linear-constraint-system games and their convex self-testing decomposition."""

__version__ = "0.1.0"
