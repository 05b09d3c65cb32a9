"""Scenario configuration for the hierarchical SFN toolkit."""
