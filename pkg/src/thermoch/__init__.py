"""Spectral Galerkin simulator and verification harness for a conserved
phase-field system with mass source and thermal memory."""

from . import analysis, elliptic, errors, galerkin, io_cli, potentials, spectral

__all__ = ["analysis", "elliptic", "errors", "galerkin", "io_cli", "potentials", "spectral"]
__version__ = "0.1.0"
