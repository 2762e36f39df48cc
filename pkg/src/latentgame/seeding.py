"""Labeled, hash-derived random substreams.

Every random draw in the package comes from ``substream(seed, *labels)``, so a
single integer seed fixes a whole run and two consumers with different labels
never share a stream.
"""
import zlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def substream(seed: int, *labels) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_label_key(l) for l in labels))
    return np.random.default_rng(ss)


def derived_seed(seed: int, *labels) -> int:
    """A 63-bit integer seed for ``labels`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_label_key(l) for l in labels))
    lo, hi = (int(v) for v in ss.generate_state(2, dtype=np.uint32))
    return ((hi & 0x7FFFFFFF) << 32) | lo
