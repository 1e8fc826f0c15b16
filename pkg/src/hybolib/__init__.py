"""Fully hyperbolic neural networks in the Lorentz model."""

__version__ = "0.1.0"
