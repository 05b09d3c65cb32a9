"""
Link Analysis

Effective Es/N0 theory, required C/N tables and BER curve synthesis.
"""
