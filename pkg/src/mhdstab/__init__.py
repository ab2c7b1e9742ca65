"""Pseudo-spectral simulation and verification of magnetically stabilized compressible MHD."""

__version__ = "0.1.0"
