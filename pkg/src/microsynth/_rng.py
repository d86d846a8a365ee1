"""Deterministic, stage-keyed random streams.

Every stochastic stage of a pipeline draws from its own generator, derived
from the run seed and a stage label.  Streams are independent of each other
and of the order in which stages execute, so a run is replayable stage by
stage.  Philox is counter-based, which keeps the derivation stable across
platforms and numpy versions.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Return the generator for stage ``label`` of the run keyed by ``seed``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    seq = np.random.SeedSequence([int(seed), _label_key(label)])
    return np.random.Generator(np.random.Philox(seq))
