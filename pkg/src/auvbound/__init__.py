"""Deterministic multi-vehicle planar simulator for range-only boundary behaviors.

Agents fence themselves inside, or mill along, a star-shaped boundary around a
single acoustic beacon using only noisy, delayed, lossy range packets and a
compass.
"""

__version__ = "0.1.0"
