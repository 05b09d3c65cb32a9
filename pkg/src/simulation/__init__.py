"""
Monte Carlo Simulation

Scenario-driven experiments built on the physical layer modules.
"""
