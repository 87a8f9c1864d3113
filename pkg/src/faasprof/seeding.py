"""Stable seed derivation: every stream of randomness hangs off one root seed."""

from __future__ import annotations

import hashlib


def derive_seed(base_seed: int, label: str) -> int:
    """Deterministic 64-bit child seed for a named random stream."""
    digest = hashlib.sha256(f"{base_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")
