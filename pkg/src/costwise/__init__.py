"""Learned cost models and resource-aware planning for a miniature distributed optimizer."""

__version__ = "0.1.0"
