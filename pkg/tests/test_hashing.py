"""Test cases for run-identification hashes."""

import hashlib

from app.utils.hashing import canonical_json, hash_config, hash_content


class TestHashing:
    """Config hashes in the manifest."""

    def test_hash_content_is_truncated_sha256(self):
        """The digest is the leading hex characters of SHA-256."""
        assert hash_content("tempering") == hashlib.sha256(b"tempering").hexdigest()[:16]
        assert len(hash_content("tempering", length=8)) == 8

    def test_key_order_does_not_matter(self):
        """Equal mappings hash equally whatever their insertion order."""
        a = {"seed": 1, "schedule": {"levels": 4, "lam": 0.5}}
        b = {"schedule": {"lam": 0.5, "levels": 4}, "seed": 1}
        assert canonical_json(a) == canonical_json(b)
        assert hash_config(a) == hash_config(b)
        assert hash_config(a) != hash_config({**a, "seed": 2})
