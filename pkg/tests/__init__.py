"""Test files and test utilities."""

