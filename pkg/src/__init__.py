"""SMDR-IS - Multi-stage underwater image restoration package."""

__version__ = "0.1.0"
