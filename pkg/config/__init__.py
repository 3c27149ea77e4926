"""Configuration files and settings."""
