"""Scripts for testing and utilities."""

