"""Quantum, classical and dissipative echoes in a kicked Kerr-nonlinear oscillator."""

__version__ = "0.1.0"
