"""Deterministic derivation of per-stage RNG seeds from one master seed."""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed(master: int, *tokens: int | str) -> int:
    """Stable 32-bit seed from the master seed plus stage tokens."""
    entropy = [int(master) & 0xFFFFFFFF]
    for token in tokens:
        if isinstance(token, str):
            entropy.append(zlib.crc32(token.encode("utf-8")))
        else:
            entropy.append(int(token) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
