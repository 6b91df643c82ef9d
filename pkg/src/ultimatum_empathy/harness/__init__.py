"""Command-line harness: configuration, sweeps and CSV output."""
