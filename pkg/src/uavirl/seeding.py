"""Deterministic seed fan-out.

Every random stream in a run is derived from the master seed by hashing
(master, component name, index), so independent components never share or
reorder draws and whole pipelines are reproducible bit-for-bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, component: str, index: int = 0) -> int:
    text = f"{master_seed}:{component}:{index}".encode("utf-8")
    digest = hashlib.sha256(text).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(master_seed: int, component: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, component, index))
