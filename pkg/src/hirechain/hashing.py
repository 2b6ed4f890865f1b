"""Hash pipeline: every digest in the system is SHA-256 applied twice."""

from __future__ import annotations

import hashlib

DIGEST_SIZE = 32
ZERO_DIGEST = b"\x00" * DIGEST_SIZE


def double_hash(data: bytes) -> bytes:
    """Return SHA-256(SHA-256(data)), a 32-byte digest."""
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def require_digest(value: bytes, what: str = "digest") -> bytes:
    if not isinstance(value, (bytes, bytearray)) or len(value) != DIGEST_SIZE:
        raise ValueError(f"{what} must be exactly {DIGEST_SIZE} bytes")
    return bytes(value)
