"""
Deterministic random streams.

All randomness flows through Philox generators keyed by (seed, *key). Work that
is split across threads is cut into fixed-size chunks, each with its own
stream, and results are combined in chunk order; the thread count therefore
never changes an output.
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Tuple, TypeVar, Union

import numpy as np

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.Philox-4x64"

T = TypeVar("T")
R = TypeVar("R")

KeyPart = Union[int, str]


def _key_word(part: KeyPart) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream key parts must be nonnegative (got {part})")
        return int(part)
    digest = hashlib.sha256(str(part).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def stream(seed: int, *key: KeyPart) -> np.random.Generator:
    """Generator for the stream identified by seed and a key path"""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative (got {seed})")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_word(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def chunk_bounds(total: int, chunk_size: int) -> List[Tuple[int, int]]:
    """Half-open [start, stop) ranges covering range(total)"""
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    return [(lo, min(lo + chunk_size, total)) for lo in range(0, total, chunk_size)]


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Map fn over items, results in input order"""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def random_signs(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform +-1 as int8"""
    return (rng.integers(0, 2, size=size, dtype=np.int8) * 2 - 1).astype(np.int8)

