"""Competitive linear threshold diffusion: exact simulation, network compilation, LP learning."""

__version__ = "0.1.0"
