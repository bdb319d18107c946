"""Deterministic approximate counting for bounded-degree spin systems via
LP-certified coupling trees, with an exact oracle and coupling diagnostics."""

__version__ = "0.1.0"
