"""Delay-tolerant network simulation and surrogate-based parameter tuning."""

__version__ = "0.1.0"
