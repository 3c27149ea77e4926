"""Core services: losses, metrics, data I/O, checkpoints, training and evaluation."""
