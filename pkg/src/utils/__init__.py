"""Utility modules for the hierarchical SFN toolkit."""

__version__ = "1.0.0"
