"""
Physical Layer

Hierarchical constellation, modified pilots, hybrid SFN channel and the
hierarchical receiver.
"""
