"""Freight cost estimation by weighted nearest-neighbor analogy."""

__version__ = "0.1.0"
