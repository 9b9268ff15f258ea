#!/usr/bin/env python3
"""
Seed splitting for feedwatch
Every random stream is derived from one invocation seed plus a path of keys
"""

import zlib

import numpy as np


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(seed, *keys):
    """Derive a 32-bit child seed from ``seed`` and a path of named keys.

    ``derive_seed(7, "synth", "owner", 3)`` always returns the same value, and
    distinct key paths give independent streams.
    """
    entropy = [int(seed) & 0xFFFFFFFF] + [_key_to_int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def derive_rng(seed, *keys):
    """numpy Generator for the stream named by ``keys``."""
    return np.random.default_rng(derive_seed(seed, *keys))
