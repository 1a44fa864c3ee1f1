"""Unrolled group-sparse recovery for joint activity detection and channel estimation."""

__version__ = "0.1.0"
