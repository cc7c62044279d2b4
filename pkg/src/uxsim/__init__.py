"""Simulated usability testing with persona-driven web agents."""

__version__ = "0.1.0"
