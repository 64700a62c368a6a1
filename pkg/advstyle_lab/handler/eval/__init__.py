"""Evaluation and feature-divergence handlers."""
