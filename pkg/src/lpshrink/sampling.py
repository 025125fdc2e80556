"""Reproducible, schedule-independent random streams for Monte Carlo runs.

Replicates are grouped in fixed-size blocks. Block ``b`` of a run seeded with
``seed`` always draws from a Philox generator keyed by ``(seed, b)``, so the
sample for any replicate depends only on ``(seed, replicate index)`` and
never on how many workers process the blocks or in what order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

from lpshrink.exceptions import ValidationError

BLOCK_SIZE = 8192
MAX_SEED = 2**64 - 1

T = TypeVar("T")


def check_seed(seed: int) -> int:
    if int(seed) != seed or not 0 <= seed <= MAX_SEED:
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=check_seed(seed), spawn_key=(block,))))


def block_sizes(reps: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(reps, block_size)
    return [block_size] * full + ([rest] if rest else [])


def run_blocks(
    fn: Callable[[np.random.Generator, int], T],
    reps: int,
    seed: int,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> list[T]:
    """Call ``fn(rng, size)`` once per block and return results in block order."""
    if int(reps) != reps or reps < 1:
        raise ValidationError(f"reps must be a positive integer, got {reps!r}")
    if workers < 1:
        raise ValidationError(f"workers must be >= 1, got {workers!r}")
    seed = check_seed(seed)
    sizes = block_sizes(int(reps), block_size)

    def task(b: int) -> T:
        return fn(block_generator(seed, b), sizes[b])

    if workers == 1 or len(sizes) == 1:
        return [task(b) for b in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(len(sizes))))


def chi_square(rng: np.random.Generator, n: float, size: int, sigma2: float = 1.0) -> np.ndarray:
    """``sigma2 * chi^2_n`` draws via the gamma distribution (shape n/2, scale 2)."""
    return sigma2 * rng.gamma(n / 2.0, 2.0, size=size)
