"""Deterministic named random streams.

Every randomized component draws from a PCG64 generator whose 64-bit seed is
the first 8 bytes (little-endian) of SHA-256 over its NUL-joined name parts.
Instance-level work uses `instance_stream(seed, instance_id)`, so results are
independent of how instances are batched or parallelized, and the whole
scheme is reproducible from the documented derivation alone.

Reference sequence: `stream("instance", 0, "example").integers(2**63, size=3)`
yields [2401108059687555373, 9128729415088301464, 4317120641664777286].
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_seed(*parts) -> int:
    key = "\x00".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "little")


def stream(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(*parts)))


def instance_stream(seed: int, instance_id: str) -> np.random.Generator:
    """Per-instance stream for reranking decisions."""
    return stream("instance", seed, instance_id)


def gauss_from_key(*parts) -> float:
    """One standard-normal draw keyed purely by the name parts (Box-Muller
    on two uniforms taken from the SHA-256 digest)."""
    key = "\x00".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    u1 = (int.from_bytes(digest[:8], "little") + 1) / (2**64 + 1)
    u2 = (int.from_bytes(digest[8:16], "little") + 1) / (2**64 + 1)
    return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))
