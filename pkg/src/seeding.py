"""
Stable seed derivation.

Seeds are derived from a master seed and a tuple of labels by hashing, so
every batch, cell and trial gets an independent stream whatever order it
is computed in.
"""

import hashlib
import json
from typing import Any

import numpy as np


def derive_seed(master_seed: int, *keys: Any) -> int:
    """
    Derive a 63-bit seed from a master seed and labels.

    Args:
        master_seed: Root seed of the run
        *keys: Labels (strings, ints, tuples) identifying the stream

    Returns:
        Non-negative integer seed
    """
    key_parts = [str(int(master_seed))]
    for key in keys:
        if isinstance(key, (list, tuple, dict)):
            key_parts.append(json.dumps(key, sort_keys=True))
        else:
            key_parts.append(str(key))

    key_string = "|".join(key_parts)
    digest = hashlib.sha256(key_string.encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def make_rng(master_seed: int, *keys: Any) -> np.random.Generator:
    """Seeded numpy generator for the stream named by ``keys``."""
    return np.random.default_rng(derive_seed(master_seed, *keys))
