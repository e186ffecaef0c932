"""Canonical serialization shared by persistence, hashing, and the API.

Every entity serializes to a key-sorted, separator-stable JSON document;
hashing over these bytes must be reproducible across processes, so the
rules here are deliberately rigid: UTC timestamps with fixed-width
microseconds, sets emitted as sorted lists, enums by value.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Type, TypeVar

T = TypeVar("T")

_TIMESTAMP_FMT = "%Y-%m-%dT%H:%M:%S.%fZ"


def format_timestamp(value: datetime) -> str:
    if value.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware")
    return value.astimezone(timezone.utc).strftime(_TIMESTAMP_FMT)


def parse_timestamp(value: str) -> datetime:
    return datetime.strptime(value, _TIMESTAMP_FMT).replace(tzinfo=timezone.utc)


def to_jsonable(value: Any) -> Any:
    """Reduce a domain value to plain JSON types, deterministically."""
    if value is None or isinstance(value, (bool, int, str)):
        if isinstance(value, Enum):
            return value.value
        return value
    if isinstance(value, float):
        return value
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, datetime):
        return format_timestamp(value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            f.name: to_jsonable(getattr(value, f.name))
            for f in dataclasses.fields(value)
        }
    if isinstance(value, (set, frozenset)):
        return sorted(to_jsonable(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, bytes):
        return value.hex()
    raise TypeError(f"cannot canonicalize {type(value).__name__}")


def canonical_json(value: Any) -> str:
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_bytes(value: Any) -> bytes:
    return canonical_json(value).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_of(value: Any) -> str:
    return sha256_hex(canonical_bytes(value))


def structure(cls: Type[T], value: Any) -> T:
    """Rebuild a domain value of type ``cls`` from plain JSON data.

    Inverse of :func:`to_jsonable` for the type shapes used in this
    package: dataclasses, enums, datetimes, Optional, frozenset/tuple/list
    collections and primitives.
    """
    return _structure(cls, value)


def _structure(tp: Any, value: Any) -> Any:
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        if len(args) != 1:
            raise TypeError(f"ambiguous union {tp}")
        return _structure(args[0], value)
    if tp is Any:
        return value
    if tp is datetime:
        return parse_timestamp(value)
    if isinstance(tp, type) and issubclass(tp, Enum):
        return tp(value)
    if dataclasses.is_dataclass(tp):
        hints = typing.get_type_hints(tp)
        kwargs = {}
        for f in dataclasses.fields(tp):
            if f.name in value:
                kwargs[f.name] = _structure(hints[f.name], value[f.name])
        return tp(**kwargs)
    if origin in (frozenset, set):
        (item_tp,) = typing.get_args(tp)
        return origin(_structure(item_tp, v) for v in value)
    if origin is tuple:
        args = typing.get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_structure(args[0], v) for v in value)
        return tuple(_structure(a, v) for a, v in zip(args, value))
    if origin is list:
        (item_tp,) = typing.get_args(tp)
        return [_structure(item_tp, v) for v in value]
    if origin is dict:
        _, val_tp = typing.get_args(tp)
        return {k: _structure(val_tp, v) for k, v in value.items()}
    if tp in (dict, list):
        return value
    if tp in (str, int, float, bool):
        if tp is int and isinstance(value, bool):
            raise TypeError("expected int, got bool")
        if not isinstance(value, tp) and not (tp is float and isinstance(value, int)):
            raise TypeError(f"expected {tp.__name__}, got {type(value).__name__}")
        return value
    if tp is type(None):
        if value is not None:
            raise TypeError("expected null")
        return None
    raise TypeError(f"cannot structure into {tp!r}")
