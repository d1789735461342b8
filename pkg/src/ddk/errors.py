"""Kernel error type and the error-code catalog shared by the API and CLI."""

from __future__ import annotations

from typing import Any


class KernelError(Exception):
    """A domain error with a stable machine-readable code.

    The same codes travel unchanged through the HTTP API (as ``error_code``
    in the uniform error body) and the CLI (on stderr, exit code 1).
    """

    def __init__(self, code: str, message: str, details: Any = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.details = details if details is not None else {}

    def to_doc(self) -> dict:
        return {
            "error_code": self.code,
            "message": self.message,
            "details": self.details,
        }


# kernel-store
EMPTY_NAME = "empty-name"
UNKNOWN_ITEM = "unknown-item"
SEQ_CONFLICT = "seq-conflict"
IMMUTABLE_PROPERTY = "immutable-property"
VALIDATION_FAILURE = "validation-failure"
UNKNOWN_SCHEMA = "unknown-schema"
RESERVED_NAME = "reserved-name"
DANGLING_TARGET = "dangling-target"
UNKNOWN_MEMBER = "unknown-member"
HASH_CHAIN_BROKEN = "hash-chain-broken"
GAP_IN_SEQUENCE = "gap-in-sequence"
RANGE_OUT_OF_BOUNDS = "range-out-of-bounds"
BAD_EVENT = "bad-event"

# schema
DUPLICATE_FIELD = "duplicate-field"
EMPTY_SCHEMA = "empty-schema"
BAD_BOUND = "bad-bound"
BAD_ENUM = "bad-enum"
BAD_SCHEMA = "bad-schema"

# descriptions
NON_EMPTY_STORE_MISMATCH = "non-empty-store-mismatch"
DANGLING_REFERENCE = "dangling-reference"
ROLE_DENIED = "role-denied"
UNKNOWN_DESCRIPTION = "unknown-description"
UNKNOWN_VERSION = "unknown-version"

# expressions
BAD_EXPRESSION = "bad-expression"

# workflow
STALE_JOB = "stale-job"
MISSING_OUTCOME = "missing-outcome"
EDIT_INVALID = "edit-invalid"
UNKNOWN_AGENT = "unknown-agent"
MALFORMED_GRAPH = "malformed-graph"

# server / interop
CONFLICT_ABORT = "conflict-abort"
BAD_DIGEST = "bad-digest"
BAD_BUNDLE = "bad-bundle"
BAD_REQUEST = "bad-request"
AUTH_FAILED = "auth-failed"

# cli
STORE_LOCKED = "store-locked"
AMBIGUOUS_NAME = "ambiguous-name"
NOT_A_STORE = "not-a-store"


def err(code: str, message: str, details: Any = None) -> KernelError:
    return KernelError(code, message, details)
