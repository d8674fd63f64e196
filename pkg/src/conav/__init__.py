"""Bi-level co-optimization of multi-agent trajectories and environment layouts."""

__version__ = "0.1.0"
