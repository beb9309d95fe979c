"""Spectral splitting simulator and Landau-damping analysis for the Vlasov-HMF model."""

__version__ = "0.1.0"
