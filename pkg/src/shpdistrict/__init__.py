"""Stochastic hierarchical partitioning for fairness-optimized districting."""

__version__ = "0.1.0"
