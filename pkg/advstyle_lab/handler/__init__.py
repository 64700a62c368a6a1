"""Command handlers, one module per CLI command."""
