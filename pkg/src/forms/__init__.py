"""Command-line forms: argument parsing and validation for the experiment harness."""
