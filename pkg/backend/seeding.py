"""
Named random streams split from one master seed.

Every consumer asks for a stream by (purpose, stage, s, a). The purpose name is
hashed with SHA-256 so the split does not depend on Python's salted hash(), and
the result seeds a PCG64 generator through a SeedSequence spawn key.
"""
import hashlib
from typing import Optional

import numpy as np


def purpose_key(purpose: str) -> int:
    digest = hashlib.sha256(purpose.encode("utf-8")).hexdigest()
    return int(digest[:8], 16)


def stream(seed: int, purpose: str, stage: int = 0, s: Optional[int] = None, a: Optional[int] = None) -> np.random.Generator:
    key = [purpose_key(purpose), int(stage)]
    if s is not None:
        key.append(int(s) + 1)
    if a is not None:
        key.append(int(a) + 1)
    seq = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(seq))


def child_seed(seed: int, purpose: str, index: int = 0) -> int:
    """Derive a 64-bit seed, e.g. one per replication."""
    return int(stream(seed, purpose, index).integers(0, 2**63 - 1))
