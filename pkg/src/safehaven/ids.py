"""Opaque, globally unique, lexicographically sortable identifiers.

Format: ``<prefix>-<12 hex ms timestamp><4 hex counter><6 hex random>``.
The fixed-width timestamp makes ids of the same prefix sort in creation
order, which keeps audit output and directory listings readable.
"""

from __future__ import annotations

import secrets
import threading
import time

_ID_LOCK = threading.Lock()
_LAST_MS = 0
_COUNTER = 0


def new_id(prefix: str) -> str:
    global _LAST_MS, _COUNTER
    if not prefix or "-" in prefix[-1:]:
        raise ValueError("id prefix must be a non-empty label")
    with _ID_LOCK:
        now_ms = time.time_ns() // 1_000_000
        if now_ms == _LAST_MS:
            _COUNTER = (_COUNTER + 1) % 0x10000
        else:
            _LAST_MS = now_ms
            _COUNTER = 0
        stamp = f"{now_ms:012x}{_COUNTER:04x}"
    return f"{prefix}-{stamp}{secrets.token_hex(3)}"
