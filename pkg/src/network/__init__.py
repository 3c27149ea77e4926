"""Restoration network: attention blocks, ASISF gates and the multi-stage model."""
