"""Grid sweep handlers."""
