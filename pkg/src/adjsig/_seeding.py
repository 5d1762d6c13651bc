from __future__ import annotations

import hashlib


def topic_key(topic: str) -> int:
    """Stable 64-bit key for a topic id (Python's hash() is salted per process)."""
    return int.from_bytes(hashlib.blake2b(topic.encode("utf-8"), digest_size=8).digest(), "little")
