"""Deterministic seed derivation.

Every random choice in the pipeline flows from a single root seed through
named sub-streams, so that a run is reproducible end to end and independent
stages (splits, per-channel weight init, search) never share a stream.
"""

import hashlib

import numpy as np


def derive_seed(root_seed: int, *tags) -> int:
    """Derive a 64-bit seed from a root seed and a sequence of name tags.

    Stable across platforms and Python versions (SHA-256 based, no reliance
    on hash randomization).
    """
    text = str(int(root_seed)) + "/" + "/".join(str(t) for t in tags)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(root_seed: int, *tags) -> np.random.Generator:
    """A fresh PCG64 generator on the named sub-stream."""
    return np.random.default_rng(derive_seed(root_seed, *tags))
