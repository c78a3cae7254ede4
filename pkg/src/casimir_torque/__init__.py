"""Fluctuation-induced torque and force between birefringent plates."""
__version__ = "0.1.0"
