"""Command-line interface for consensus-halt."""
