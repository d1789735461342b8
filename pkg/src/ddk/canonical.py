"""Canonical JSON encoding, content digests, and timestamp formatting.

Every byte that gets hashed, stored, or compared for equality in the kernel
goes through this module. Canonical form: UTF-8, keys sorted by code point,
no insignificant whitespace, no NaN/Infinity. The encoding is injective:
two documents serialize to the same bytes iff they are equal.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone

GENESIS_HASH = "0" * 64

_TS_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"


def canonical_bytes(document: object) -> bytes:
    """Serialize a JSON-compatible document to its canonical byte form."""
    try:
        text = json.dumps(
            document,
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
            allow_nan=False,
        )
    except ValueError as exc:
        raise ValueError(f"document is not canonically serializable: {exc}") from exc
    return text.encode("utf-8")


def canonical_text(document: object) -> str:
    """Canonical form as a str (same bytes as ``canonical_bytes`` in UTF-8)."""
    return canonical_bytes(document).decode("utf-8")


def from_canonical(data: bytes | str) -> object:
    """Parse a canonical JSON document."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)


def digest_hex(data: bytes) -> str:
    """SHA-256 digest as lower-case hex."""
    return hashlib.sha256(data).hexdigest()


def document_digest(document: object) -> str:
    """SHA-256 over the canonical bytes of a document."""
    return digest_hex(canonical_bytes(document))


def now_timestamp() -> str:
    """Current UTC instant, microsecond precision, canonical format."""
    return datetime.now(timezone.utc).strftime(_TS_FORMAT)


def parse_timestamp(value: str) -> datetime:
    """Parse a canonical timestamp back to an aware datetime."""
    return datetime.strptime(value, _TS_FORMAT).replace(tzinfo=timezone.utc)


def is_primitive(value: object) -> bool:
    """True for the four primitive value types (bool is not an integer here)."""
    if isinstance(value, bool):
        return True
    return isinstance(value, (str, int, float)) and not isinstance(value, bool)
