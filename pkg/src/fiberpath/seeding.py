"""Stable seed derivation for independent deterministic streams."""

from __future__ import annotations

import hashlib

__all__ = ["derive_seed"]


def derive_seed(*parts) -> int:
    """64-bit seed from a stable hash of the parts' string forms.

    Platform- and process-independent, so campaigns can resume and their
    cells stay statistically independent of one another.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")
