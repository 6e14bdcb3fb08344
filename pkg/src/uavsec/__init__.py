"""Simulation of stealthy attacks and their detection in a switching UAV formation."""

__version__ = "0.1.0"
