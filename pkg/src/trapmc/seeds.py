"""Deterministic seed splitting.

All randomness in a run flows from a single 64-bit master seed. Child
streams are derived by hashing (master, path) where path is a sequence of
integers identifying the consumer (band index, replica index, ...). Distinct
paths give statistically independent streams; identical inputs always give
identical streams.
"""

from __future__ import annotations

import hashlib
import struct
from typing import Iterable

_MASK64 = (1 << 64) - 1


def derive_seed(master: int, path: Iterable[int] = ()) -> int:
    """Derive a 64-bit child seed from a master seed and an integer path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", master & _MASK64))
    for p in path:
        h.update(struct.pack("<q", int(p)))
    return int.from_bytes(h.digest(), "little")
