"""Adversarial style augmentation laboratory."""

__version__ = "0.1.0"
