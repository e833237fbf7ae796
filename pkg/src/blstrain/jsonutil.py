"""Canonical JSON helpers: one byte representation per document."""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical(doc: Any) -> str:
    """Serialize with sorted keys and compact separators (no trailing newline)."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def doc_hash(doc: Any) -> str:
    """Hex sha256 of the canonical serialization."""
    return hashlib.sha256(canonical(doc).encode("utf-8")).hexdigest()
