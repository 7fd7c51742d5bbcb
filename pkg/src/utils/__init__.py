"""Utility modules for the experiment harness (artifact storage)."""
