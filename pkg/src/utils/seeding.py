"""Seeded construction helpers."""

from contextlib import contextmanager
from typing import Iterator

import torch


@contextmanager
def seeded(seed: int) -> Iterator[None]:
    """Run a block under ``torch.manual_seed(seed)`` without disturbing the global RNG."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def make_generator(seed: int) -> torch.Generator:
    """CPU generator seeded for data order, crops and synthetic data."""
    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator
