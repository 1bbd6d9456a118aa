"""Distributed guiding vector fields for multi-robot interception, enclosing and circumnavigation."""

__version__ = "0.1.0"
