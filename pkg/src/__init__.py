"""
Hierarchical SFN Local Content Toolkit

Link analysis and Monte Carlo simulation of hierarchical modulation carrying
local content in hybrid satellite/terrestrial single frequency networks.
"""

__version__ = "1.0.0"
__author__ = "Hierarchical SFN Toolkit"
