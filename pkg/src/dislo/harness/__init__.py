"""Command-line harness: configuration, experiment drivers and result emission."""
