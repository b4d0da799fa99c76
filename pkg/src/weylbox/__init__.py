"""Discretized magnetic Pauli and Dirac operators, eigenvalue counting and Weyl asymptotics."""

__version__ = "0.1.0"
