"""Topology-based representations for whole-arm holding of a humanoid body."""
__version__ = "0.1.0"
