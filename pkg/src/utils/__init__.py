"""Utility functions and helpers: pyramids, padding, errors, logging."""
