"""Benchmark harness comparing flow feature representations for novelty detection."""

__version__ = "0.1.0"
