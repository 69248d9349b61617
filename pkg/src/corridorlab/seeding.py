"""Deterministic seed scheduling for (beta, replica) task grids.

Each task label is hashed with BLAKE2b into a 62-bit base; the environment
seed is base*2 plus a mirror bit set for negative beta.  Since environment
generation treats the lowest seed bit as a sign flip (see env module), the
labels (beta, r) and (-beta, r) receive environments that are exact path
mirrors of one another, which is what makes evenness checks of the decay
constant exact rather than statistical.
"""

from __future__ import annotations

import hashlib
import struct

__all__ = ["seed_schedule"]


def seed_schedule(master_seed: int, labels) -> list:
    """Map distinct (beta, replica) labels to distinct environment seeds.

    Deterministic and injective (62-bit hash space); duplicate labels are
    rejected.  Mirrored labels share the hash base and differ only in the
    mirror bit.
    """
    labels = list(labels)
    if len(set(labels)) != len(labels):
        raise ValueError("labels must be distinct")
    seeds = []
    for beta, replica in labels:
        beta = float(beta)
        key = struct.pack("<qdq", int(master_seed), abs(beta) + 0.0, int(replica))
        digest = hashlib.blake2b(key, digest_size=8).digest()
        base = int.from_bytes(digest, "little") >> 2
        mirror = 1 if beta < 0.0 else 0
        seeds.append(base * 2 + mirror)
    return seeds
