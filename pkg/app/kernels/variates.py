"""Per-replicate random streams.

Every tempering step consumes one fixed row of variates whether or not the
draw is needed: four uniforms (lazy hold, move type, level direction,
acceptance) and d standard normals. Rows are generated in fixed-size chunks,
so the sequence a replicate sees never depends on how the caller batches its
requests or on how many threads run other replicates.
"""

from typing import Sequence, Tuple

import numpy as np

# Uniform columns of one step row
LAZY, MOVE, DIRECTION, ACCEPT = 0, 1, 2, 3
N_UNIFORMS = 4

# spawn_key suffix reserved for the initial-point draw of a stream
INIT_TAG = 2**31 - 1

DEFAULT_CHUNK = 256


def seed_sequence(seed: int, key: Sequence[int] = ()) -> np.random.SeedSequence:
    """Independent child sequence addressed by (seed, key)."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


class VariateStream:
    """Chunked source of step variates for one chain."""

    def __init__(self, seed: int, key: Sequence[int], dim: int, chunk: int = DEFAULT_CHUNK):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if chunk < 1:
            raise ValueError("chunk must be >= 1")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self.dim = dim
        self.chunk = chunk
        self._rng = np.random.default_rng(seed_sequence(self.seed, self.key))
        self._uniforms = np.empty((0, N_UNIFORMS))
        self._normals = np.empty((0, dim))
        self._pos = 0
        self.consumed = 0

    def _refill(self) -> None:
        self._uniforms = self._rng.random((self.chunk, N_UNIFORMS))
        self._normals = self._rng.standard_normal((self.chunk, self.dim))
        self._pos = 0

    def next(self) -> Tuple[np.ndarray, np.ndarray]:
        """One step row: (uniforms[4], normals[d])."""
        if self._pos >= self._uniforms.shape[0]:
            self._refill()
        u = self._uniforms[self._pos]
        z = self._normals[self._pos]
        self._pos += 1
        self.consumed += 1
        return u, z

    def take(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Next k step rows as arrays of shape (k, 4) and (k, d)."""
        if k < 0:
            raise ValueError("k must be >= 0")
        us, zs, remaining = [], [], k
        while remaining > 0:
            if self._pos >= self._uniforms.shape[0]:
                self._refill()
            n = min(remaining, self._uniforms.shape[0] - self._pos)
            us.append(self._uniforms[self._pos:self._pos + n])
            zs.append(self._normals[self._pos:self._pos + n])
            self._pos += n
            remaining -= n
        self.consumed += k
        if not us:
            return np.empty((0, N_UNIFORMS)), np.empty((0, self.dim))
        return np.concatenate(us), np.concatenate(zs)


def initial_point(seed: int, key: Sequence[int], dim: int, sigma0_sq: float) -> np.ndarray:
    """x0 ~ N(0, sigma0^2 I) from the stream's reserved initial-point child."""
    if sigma0_sq <= 0:
        raise ValueError("sigma0_sq must be positive")
    rng = np.random.default_rng(seed_sequence(seed, tuple(key) + (INIT_TAG,)))
    return np.sqrt(sigma0_sq) * rng.standard_normal(dim)


def replicate_streams(seed: int, prefix: Sequence[int], ids: Sequence[int], dim: int) -> list:
    """One stream per replicate id, keyed (prefix..., id)."""
    return [VariateStream(seed, tuple(prefix) + (int(i),), dim) for i in ids]
