"""Entropic fluctuation toolkit for finite classical and quantum systems."""

__version__ = "0.1.0"
