"""Versioned entity store with compare-and-swap writes.

The storage backend is a minimal key-value interface; bundled backends
are an in-memory dict and a file-per-key directory layout, both adequate
for a single-process deployment and for tests.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, Iterator, Protocol

from .canonical import canonical_json, structure, to_jsonable
from .domain import ENTITY_TYPES


class NotFoundError(KeyError):
    """No such entity."""


class VersionConflictError(Exception):
    """Expected version did not match the stored version; retry."""


_REGISTRY: dict[str, type] = {}
_NAMES: dict[type, str] = {}


def register_entity(name: str, cls: type) -> None:
    """Make a record type storable under a stable type name."""
    _REGISTRY[name] = cls
    _NAMES[cls] = name


def type_name_of(entity: Any) -> str:
    return _NAMES[type(entity)]


def record_from_dict(type_name: str, data: dict) -> Any:
    return structure(_REGISTRY[type_name], data)


for _name, _cls in ENTITY_TYPES.items():
    register_entity(_name, _cls)


class KVBackend(Protocol):
    def read(self, key: str) -> bytes | None: ...

    def compare_and_set(self, key: str, expected: bytes | None, new: bytes) -> bool: ...

    def scan(self, prefix: str) -> Iterator[tuple[str, bytes]]: ...


class MemoryKV:
    def __init__(self) -> None:
        self._data: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def read(self, key: str) -> bytes | None:
        with self._lock:
            return self._data.get(key)

    def compare_and_set(self, key: str, expected: bytes | None, new: bytes) -> bool:
        with self._lock:
            if self._data.get(key) != expected:
                return False
            self._data[key] = new
            return True

    def scan(self, prefix: str) -> Iterator[tuple[str, bytes]]:
        with self._lock:
            items = [(k, v) for k, v in self._data.items() if k.startswith(prefix)]
        yield from sorted(items)


class FileKV:
    """One file per key under a root directory; single-process CAS."""

    def __init__(self, root: str | Path) -> None:
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        safe = key.replace("/", "__")
        return self._root / f"{safe}.json"

    def _key(self, path: Path) -> str:
        return path.stem.replace("__", "/")

    def read(self, key: str) -> bytes | None:
        path = self._path(key)
        with self._lock:
            return path.read_bytes() if path.exists() else None

    def compare_and_set(self, key: str, expected: bytes | None, new: bytes) -> bool:
        path = self._path(key)
        with self._lock:
            current = path.read_bytes() if path.exists() else None
            if current != expected:
                return False
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(new)
            tmp.replace(path)
            return True

    def scan(self, prefix: str) -> Iterator[tuple[str, bytes]]:
        with self._lock:
            entries = [
                (self._key(p), p.read_bytes())
                for p in sorted(self._root.glob("*.json"))
                if self._key(p).startswith(prefix)
            ]
        yield from entries


class EntityStore:
    """Typed entity persistence with optimistic concurrency.

    Writes require the caller's expected version; a nonzero expectation
    that does not match the stored version raises ``VersionConflictError``
    and the caller retries. Reads are snapshot-consistent per key.
    """

    def __init__(self, backend: KVBackend | None = None) -> None:
        self._backend = backend or MemoryKV()

    @staticmethod
    def _key(type_name: str, entity_id: str) -> str:
        return f"{type_name}/{entity_id}"

    def _envelope(self, version: int, body: dict) -> bytes:
        return canonical_json({"version": version, "body": body}).encode("utf-8")

    def put(self, entity: Any, expected_version: int) -> int:
        """Compare-and-swap write; ``expected_version=0`` creates."""
        type_name = type_name_of(entity)
        key = self._key(type_name, entity.id)
        current = self._backend.read(key)
        current_version = 0
        if current is not None:
            current_version = json.loads(current)["version"]
        if current_version != expected_version:
            raise VersionConflictError(
                f"{key}: expected version {expected_version}, stored {current_version}"
            )
        new_version = expected_version + 1
        envelope = self._envelope(new_version, to_jsonable(entity))
        if not self._backend.compare_and_set(key, current, envelope):
            raise VersionConflictError(f"{key}: concurrent write detected")
        return new_version

    def get(self, type_name: str, entity_id: str) -> tuple[Any, int]:
        raw = self._backend.read(self._key(type_name, entity_id))
        if raw is None:
            raise NotFoundError(f"{type_name} {entity_id} not found")
        envelope = json.loads(raw)
        return record_from_dict(type_name, envelope["body"]), envelope["version"]

    def try_get(self, type_name: str, entity_id: str) -> tuple[Any, int] | None:
        try:
            return self.get(type_name, entity_id)
        except NotFoundError:
            return None

    def exists(self, type_name: str, entity_id: str) -> bool:
        return self._backend.read(self._key(type_name, entity_id)) is not None

    def list(self, type_name: str) -> list[tuple[Any, int]]:
        results = []
        for _key, raw in self._backend.scan(f"{type_name}/"):
            envelope = json.loads(raw)
            results.append(
                (record_from_dict(type_name, envelope["body"]), envelope["version"])
            )
        return results

    def snapshot(self) -> dict[str, dict[str, Any]]:
        """All entities keyed by type then id, for integrity sweeps."""
        snap: dict[str, dict[str, Any]] = {}
        for key, raw in self._backend.scan(""):
            type_name, _, entity_id = key.partition("/")
            if type_name not in _REGISTRY:
                continue
            envelope = json.loads(raw)
            snap.setdefault(type_name, {})[entity_id] = record_from_dict(
                type_name, envelope["body"]
            )
        return snap
