"""Command line, study configuration and report persistence."""
