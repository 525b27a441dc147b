"""Floquet-engineered chiral state transfer in a qubit/resonator/two-magnon network."""

__version__ = "0.1.0"
