"""Seed derivation and counter-based random streams.

Every random quantity in the package is drawn from a Philox stream whose
128-bit key is built from a 64-bit seed and a 64-bit stream tag.  Philox is
counter based: the k-th output of a stream depends only on (key, k), so a
fixed enumeration of matrix entries gives each entry its own position in the
stream and results do not depend on how work is split across workers.
"""
import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1


def _label_bytes(label) -> bytes:
    if isinstance(label, bytes):
        return label
    if isinstance(label, int):
        return b"i" + str(label).encode()
    return b"s" + str(label).encode()


def seed_derive(master: int, path=()) -> int:
    """Derive a child seed from ``master`` and a list of labels.

    A blake2b hash chain: each label is hashed together with the running
    digest, so ``seed_derive(m, [a, b]) == seed_derive(seed_derive(m, [a]), [b])``.
    """
    seed = int(master) & MASK64
    for label in path:
        h = hashlib.blake2b(digest_size=8, person=b"rbmlab-seed")
        h.update(struct.pack("<Q", seed))
        h.update(_label_bytes(label))
        seed = struct.unpack("<Q", h.digest())[0]
    return seed


def tag_of(name: str) -> int:
    h = hashlib.blake2b(name.encode(), digest_size=8, person=b"rbmlab-tag")
    return struct.unpack("<Q", h.digest())[0]


def stream(seed: int, tag: str = "main") -> np.random.Generator:
    """Philox generator keyed by (seed, tag)."""
    key = ((int(seed) & MASK64) << 64) | tag_of(tag)
    return np.random.Generator(np.random.Philox(key=key))


def open_uniforms(gen: np.random.Generator, size) -> np.ndarray:
    """Uniforms strictly inside (0, 1), one raw 64-bit word per value.

    Using ``random_raw`` keeps the mapping between stream position and output
    index exact, which is what makes per-entry addressing reproducible.
    """
    size = tuple(np.atleast_1d(size)) if not isinstance(size, int) else (size,)
    count = int(np.prod(size))
    raw = gen.bit_generator.random_raw(count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return u.reshape(size)


def gaussians(gen: np.random.Generator, size) -> np.ndarray:
    from scipy.special import ndtri

    return ndtri(open_uniforms(gen, size))
