"""Underwater image synthesis, restoration and quality assessment."""

__version__ = "0.1.0"
