"""Stable seed derivation for per-item randomness.

Built-in hash() is salted per process, so derived seeds go through sha256 to
stay identical across runs, machines, and worker counts.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """64-bit seed deterministically derived from the given parts."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
