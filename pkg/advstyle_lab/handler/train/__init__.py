"""Training handlers."""
