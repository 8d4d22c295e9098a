"""Sharpened Young inequality for twisted convolution: numerics."""

__version__ = "0.1.0"
