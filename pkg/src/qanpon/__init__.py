"""Quantum access network coexisting with a 10G-EPON: link budgets, Raman
noise, decoy-state key rates, a pulse-level Monte Carlo and key
post-processing."""

__version__ = "0.1.0"
