"""Benchmark generation handlers."""
