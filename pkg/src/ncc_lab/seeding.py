"""Deterministic per-component seed derivation from a single root seed.

Every random stream in the pipeline is derived as
``derive_seed(root_seed, "component-name")`` so that one ``--seed`` flag
reproduces the whole run while components stay statistically independent.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, component: str) -> int:
    """Hash a component name into the root seed, yielding a 64-bit seed."""
    digest = hashlib.sha256(f"{root_seed}:{component}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(root_seed: int, component: str) -> np.random.Generator:
    """Seeded generator for one named component of a run."""
    return np.random.default_rng(derive_seed(root_seed, component))
