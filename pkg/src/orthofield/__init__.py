"""Simulation and numerical verification of orthomartingale random-field inequalities."""

__version__ = "0.1.0"
