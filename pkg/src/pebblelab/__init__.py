"""Desk-scale laboratory for the I/O complexity of Strassen-type matrix multiplication."""

__version__ = "0.1.0"
