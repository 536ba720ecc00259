"""Similarity-aware multi-modal fake news detection with hand-derived gradients."""

__version__ = "0.1.0"

VARIANTS = ("SAFE", "T", "V", "S", "W")
