"""Simulated radio-signal spectrograms, edge-enhanced preprocessing, and a
from-scratch CNN classifier trained with Adamax."""

__version__ = "0.1.0"
