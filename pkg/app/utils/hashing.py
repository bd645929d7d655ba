"""Hashing utilities for run identification."""

import hashlib
import json
from typing import Any, Mapping

CONFIG_HASH_LENGTH = 16


def hash_content(content: str, length: int = CONFIG_HASH_LENGTH) -> str:
    """Truncated SHA-256 hex digest of a string."""
    return hashlib.sha256(content.encode("utf-8")).hexdigest()[:length]


def canonical_json(payload: Mapping[str, Any]) -> str:
    """Serialize a mapping with sorted keys and no whitespace variance."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


def hash_config(payload: Mapping[str, Any]) -> str:
    """Generate the manifest hash for a resolved configuration."""
    return hash_content(canonical_json(payload))
