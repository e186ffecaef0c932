"""Hash-chained append-only audit log.

Each event hashes the previous event's hash together with the canonical
serialization of its own fields, so any mutation, reordering or deletion
of history is detectable by recomputation.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol

from .canonical import canonical_json, digest_of, sha256_hex, structure, to_jsonable

GENESIS_HASH = "0" * 64


@dataclass(frozen=True)
class EntityRef:
    type: str
    id: str
    version: int


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    actor_id: str
    action: str
    entity_ref: EntityRef
    payload_digest: str
    timestamp: datetime
    prev_hash: str
    this_hash: str


def compute_event_hash(
    prev_hash: str,
    *,
    seq: int,
    actor_id: str,
    action: str,
    entity_ref: EntityRef,
    payload_digest: str,
    timestamp: datetime,
) -> str:
    body = canonical_json(
        {
            "seq": seq,
            "actor_id": actor_id,
            "action": action,
            "entity_ref": to_jsonable(entity_ref),
            "payload_digest": payload_digest,
            "timestamp": timestamp,
        }
    )
    return sha256_hex((prev_hash + body).encode("utf-8"))


class AuditBackend(Protocol):
    def append_line(self, line: str) -> None: ...

    def lines(self) -> list[str]: ...


class MemoryAuditBackend:
    def __init__(self) -> None:
        self._lines: list[str] = []

    def append_line(self, line: str) -> None:
        self._lines.append(line)

    def lines(self) -> list[str]:
        return list(self._lines)


class FileAuditBackend:
    """Newline-delimited canonical JSON on disk, fsync'd per append."""

    def __init__(self, path: str | Path) -> None:
        self._path = Path(path)
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._path.touch(exist_ok=True)

    def append_line(self, line: str) -> None:
        with self._path.open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()

    def lines(self) -> list[str]:
        return self._path.read_text(encoding="utf-8").splitlines()


@dataclass(frozen=True)
class ChainVerification:
    valid: bool
    checked: int
    divergence_seq: int | None = None
    length_mismatch: bool = False
    note: str = ""


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


class AuditLog:
    """Linearizable append; concurrent readers see a consistent prefix."""

    def __init__(
        self,
        backend: AuditBackend | None = None,
        clock: Callable[[], datetime] | None = None,
    ) -> None:
        self._backend = backend or MemoryAuditBackend()
        self._clock = clock or _utc_now
        self._lock = threading.Lock()
        self._events: list[AuditEvent] = [
            _event_from_line(line) for line in self._backend.lines()
        ]

    def append(
        self,
        actor_id: str,
        action: str,
        entity_ref: EntityRef,
        payload: Any = None,
    ) -> AuditEvent:
        if not actor_id:
            raise ValueError("audit events require an actor")
        if not action:
            raise ValueError("audit events require an action")
        payload_digest = digest_of(payload) if payload is not None else ""
        with self._lock:
            seq = len(self._events) + 1
            prev_hash = self._events[-1].this_hash if self._events else GENESIS_HASH
            timestamp = self._clock()
            event = AuditEvent(
                seq=seq,
                actor_id=actor_id,
                action=action,
                entity_ref=entity_ref,
                payload_digest=payload_digest,
                timestamp=timestamp,
                prev_hash=prev_hash,
                this_hash=compute_event_hash(
                    prev_hash,
                    seq=seq,
                    actor_id=actor_id,
                    action=action,
                    entity_ref=entity_ref,
                    payload_digest=payload_digest,
                    timestamp=timestamp,
                ),
            )
            self._events.append(event)
            self._backend.append_line(canonical_json(event))
            return event

    def events(self, start_seq: int = 1, end_seq: int | None = None) -> list[AuditEvent]:
        with self._lock:
            end = len(self._events) if end_seq is None else end_seq
            return self._events[start_seq - 1 : end]

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)

    def head_hash(self) -> str:
        with self._lock:
            return self._events[-1].this_hash if self._events else GENESIS_HASH

    def verify(self, start_seq: int = 1, end_seq: int | None = None) -> ChainVerification:
        return verify_events(self.events(start_seq, end_seq), start_seq=start_seq)

    def export_ndjson(self) -> str:
        return "\n".join(canonical_json(e) for e in self.events()) + (
            "\n" if len(self) else ""
        )


def _event_from_line(line: str) -> AuditEvent:
    import json

    return structure(AuditEvent, json.loads(line))


def verify_events(
    events: Iterable[AuditEvent],
    *,
    start_seq: int = 1,
    expected_length: int | None = None,
) -> ChainVerification:
    """Recompute every hash in a range, reporting the first divergence."""
    checked = 0
    prev_hash: str | None = GENESIS_HASH if start_seq == 1 else None
    expected_seq = start_seq
    for event in events:
        if event.seq != expected_seq:
            return ChainVerification(
                valid=False,
                checked=checked,
                divergence_seq=expected_seq,
                note=f"sequence gap: expected {expected_seq}, found {event.seq}",
            )
        if prev_hash is not None and event.prev_hash != prev_hash:
            return ChainVerification(
                valid=False,
                checked=checked,
                divergence_seq=event.seq,
                note="previous-hash link broken",
            )
        recomputed = compute_event_hash(
            event.prev_hash,
            seq=event.seq,
            actor_id=event.actor_id,
            action=event.action,
            entity_ref=event.entity_ref,
            payload_digest=event.payload_digest,
            timestamp=event.timestamp,
        )
        if recomputed != event.this_hash:
            return ChainVerification(
                valid=False,
                checked=checked,
                divergence_seq=event.seq,
                note="event content does not match its hash",
            )
        prev_hash = event.this_hash
        expected_seq += 1
        checked += 1
    length_mismatch = expected_length is not None and checked != expected_length
    return ChainVerification(
        valid=True,
        checked=checked,
        length_mismatch=length_mismatch,
        note="log shorter than expected" if length_mismatch else "",
    )


def import_and_verify(
    ndjson: str, *, expected_length: int | None = None
) -> ChainVerification:
    """Offline verification of an exported log."""
    events = [
        _event_from_line(line) for line in ndjson.splitlines() if line.strip()
    ]
    return verify_events(events, expected_length=expected_length)
