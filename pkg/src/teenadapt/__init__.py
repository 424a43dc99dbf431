"""Weakly supervised cross-platform teenager detection with adversarial encoder adaptation."""

__version__ = "0.1.0"
