"""Congestion-pricing simulator and online driver-route matching mechanisms."""

__version__ = "0.1.0"
