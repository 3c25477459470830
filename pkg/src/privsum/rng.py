"""Deterministic RNG substreams for multi-party simulation.

All randomness flows through numpy PCG64 generators. A substream is
addressed by a master seed plus a path of labels; each label is hashed
with SHA-256 into the seed material, so a party's stream depends only on
(master_seed, its own path). Adding or removing another party never
shifts anyone else's draws, which is what makes with/without-adversary
comparisons bitwise reproducible.

Gaussian variates use numpy's ziggurat sampler (Generator.standard_normal),
bit-reproducible for a fixed numpy version on a given platform.
"""

from __future__ import annotations

import hashlib

import numpy as np

Label = str | int

_MASK_128 = (1 << 128) - 1


def _label_value(label: Label) -> int:
    # repr() keeps int and str labels in disjoint namespaces ("1" vs 1).
    digest = hashlib.sha256(repr(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(master_seed: int, *path: Label) -> np.random.Generator:
    """Generator for the substream addressed by (master_seed, *path)."""
    entropy = [int(master_seed) & _MASK_128] + [_label_value(p) for p in path]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_generator(seed: int | np.random.Generator) -> np.random.Generator:
    """Accept an int seed or an existing Generator.

    Passing a Generator hands over its stream: subsequent draws are
    consumed from it in call order.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return substream(int(seed))


def seed_int(seed: int | np.random.Generator) -> int:
    """Normalize to a plain integer seed, drawing one from a Generator."""
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(0, 2 ** 62))
    return int(seed)
