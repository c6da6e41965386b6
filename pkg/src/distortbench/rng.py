"""Seedable counter-based random streams with per-pixel indexing.

Every stochastic image operation draws from a Philox4x64 stream whose key is
derived from (experiment_seed, image_id, spec_digest). Draw ``i`` of a keyed
stream depends only on (key, i), so noise fields can be rendered whole, in
tiles, or in parallel and the samples still agree. Pixel draws are laid out
plane-major: the value for (plane, row, col) sits at stream index
``plane * plane_stride + row * width + col``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

ALGORITHM_ID = "philox4x64/sha256-key/plane-major-v1"

_U64_MASK = (1 << 64) - 1
# Philox4x64 emits 4 uint64 words per counter increment.
_WORDS_PER_BLOCK = 4


def derive_key(experiment_seed: int, image_id: str, spec_digest: str) -> int:
    """Derive a 128-bit Philox key; a pure function of the three fields."""
    if not 0 <= experiment_seed <= _U64_MASK:
        raise ValueError("experiment_seed must fit in 64 bits")
    h = hashlib.sha256()
    h.update(experiment_seed.to_bytes(8, "little"))
    h.update(b"\x1f")
    h.update(image_id.encode("utf-8"))
    h.update(b"\x1f")
    h.update(spec_digest.encode("utf-8"))
    return int.from_bytes(h.digest()[:16], "little")


@dataclass(frozen=True)
class StreamSeed:
    """Identifies one deterministic noise stream for one image and spec."""

    experiment_seed: int
    image_id: str
    spec_digest: str

    @property
    def key(self) -> int:
        return derive_key(self.experiment_seed, self.image_id, self.spec_digest)

    def provenance(self) -> dict:
        return {
            "experiment_seed": self.experiment_seed,
            "image_id": self.image_id,
            "spec_digest": self.spec_digest,
            "rng": ALGORITHM_ID,
        }


def raw_block(key: int, start: int, count: int) -> np.ndarray:
    """uint64 stream values [start, start+count); independent of chunking."""
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    block_start = start // _WORDS_PER_BLOCK
    lead = start - block_start * _WORDS_PER_BLOCK
    bg = Philox(key=key, counter=[block_start, 0, 0, 0])
    raw = bg.random_raw(lead + count)
    return raw[lead:]


def plane_stride(height: int, width: int) -> int:
    """Stream indices per plane, padded so planes start block-aligned."""
    n = height * width
    return ((n + _WORDS_PER_BLOCK - 1) // _WORDS_PER_BLOCK) * _WORDS_PER_BLOCK


def uniform_plane(key: int, height: int, width: int, plane: int = 0) -> np.ndarray:
    """One (height, width) plane of i.i.d. U[0, 1) float64 samples."""
    stride = plane_stride(height, width)
    raw = raw_block(key, plane * stride, height * width)
    u = (raw >> np.uint64(11)) * 2.0**-53
    return u.reshape(height, width)


def normal_plane(key: int, height: int, width: int, pair: int = 0) -> np.ndarray:
    """One plane of i.i.d. standard normals via Box-Muller.

    Consumes uniform planes 2*pair and 2*pair + 1, preserving the per-pixel
    indexing contract (ziggurat-style rejection would not).
    """
    u1 = uniform_plane(key, height, width, 2 * pair)
    u2 = uniform_plane(key, height, width, 2 * pair + 1)
    r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 in (0, 1], no log(0)
    return r * np.cos(2.0 * np.pi * u2)


def sequence_generator(key: int, label: str) -> Generator:
    """A sequential generator for non-pixel draws (shuffles, sampling).

    The label keeps sequential streams disjoint from pixel planes and from
    each other; only whole-stream determinism is guaranteed here.
    """
    h = hashlib.sha256()
    h.update(key.to_bytes(16, "little"))
    h.update(b"\x1f")
    h.update(label.encode("utf-8"))
    sub = int.from_bytes(h.digest()[:16], "little")
    return Generator(Philox(key=sub))
