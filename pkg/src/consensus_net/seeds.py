"""Deterministic 64-bit seed derivation.

Every random choice in a run is a pure function of a master seed plus a
short label and some integer indices, so runs can execute in any order (or
in parallel) and still reproduce bit-for-bit.

The mixing function is the SplitMix64 finalizer::

    z = (x + 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    mix64(x) = z ^ (z >> 31)

``derive_seed(master, label, *idx)`` starts from
``mix64(master ^ label_code(label))`` and folds each index ``i`` in with
``h = mix64(h ^ (i mod 2**64))``.  ``label_code`` is the first 8 bytes of
BLAKE2b(label), read little-endian.
"""

from __future__ import annotations

import hashlib

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def label_code(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little")


def derive_seed(master: int, label: str, *indices: int) -> int:
    h = mix64((master & MASK64) ^ label_code(label))
    for i in indices:
        h = mix64(h ^ (int(i) & MASK64))
    return h


def tie_draw(seed: int, step: int, node: int) -> int:
    """64-bit draw used to break a tie for ``node`` during ``step``.

    Counter-based, so the result does not depend on the order in which
    nodes are visited.  The compiled kernel reproduces this exactly.
    """
    h = mix64((seed & MASK64) ^ ((step * GOLDEN) & MASK64))
    return mix64(h ^ (node & MASK64))


def final_coin(seed: int) -> int:
    """Fair bit used when both clusters end with exactly the same size."""
    return mix64((seed & MASK64) ^ 0xD1B54A32D192ED03) & 1


def uniform_other(seed: int, n: int, exclude: int) -> int:
    """Uniform node id in ``range(n)`` other than ``exclude``."""
    o = mix64(seed & MASK64) % (n - 1)
    return o + 1 if o >= exclude else o
