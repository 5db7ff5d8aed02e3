"""Canonical JSON encoding — the single preimage format for hashing and signing.

Every digest and every signature in this package is computed over the output
of :func:`canonical_bytes`: UTF-8, object keys sorted lexicographically, no
insignificant whitespace, integers in decimal, binary values as lowercase hex
strings. Floats are rejected outright (their textual form is not portable).
Two logically equal objects therefore always produce identical bytes, on any
machine, in any process.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

ZERO_DIGEST = "0" * 64
ZERO_ADDRESS = "0" * 40

_HEXDIGITS = set("0123456789abcdef")


def _reject_floats(obj: Any) -> None:
    if isinstance(obj, float):
        raise TypeError("floats are not allowed in canonical JSON")
    if isinstance(obj, dict):
        for k, v in obj.items():
            if not isinstance(k, str):
                raise TypeError(f"non-string key in canonical JSON: {k!r}")
            _reject_floats(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _reject_floats(v)


def canonical_dumps(obj: Any) -> str:
    """Serialize to the canonical JSON string form."""
    _reject_floats(obj)
    return json.dumps(
        obj,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def canonical_bytes(obj: Any) -> bytes:
    """Serialize to canonical UTF-8 bytes (the hashing/signing preimage)."""
    return canonical_dumps(obj).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest(obj: Any) -> str:
    """SHA-256 (lowercase hex) of the canonical bytes of *obj*."""
    return sha256_hex(canonical_bytes(obj))


def is_hex(value: Any, nbytes: int | None = None) -> bool:
    """True iff *value* is a lowercase hex string, optionally of *nbytes* bytes."""
    if not isinstance(value, str) or len(value) % 2:
        return False
    if nbytes is not None and len(value) != 2 * nbytes:
        return False
    return all(c in _HEXDIGITS for c in value)


def require_hex(value: Any, nbytes: int, field: str) -> str:
    if not is_hex(value, nbytes):
        raise ValueError(f"{field} must be {nbytes} bytes of lowercase hex")
    return value
