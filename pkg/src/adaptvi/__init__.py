"""Adaptive first-order methods for relatively strongly monotone variational inequalities."""

__version__ = "0.1.0"
