"""Gradient verification handlers."""
