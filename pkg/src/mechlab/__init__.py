"""Finite mechanism design workbench: environments, mechanisms, equilibria,
behavioural simulation of the lying-aversion experiment and its analysis."""

__version__ = "0.1.0"
