"""Doorverse: a deterministic desk-scale door-manipulation workbench."""

__version__ = "0.1.0"
