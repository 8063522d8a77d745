"""Counter-based random streams.

Every draw the optimizers make is addressed by ``(seed, purpose, step)`` and
served from a Philox generator whose key is derived from the seed and whose
counter encodes the purpose and step. Batches are drawn row-major, so
candidate ``k`` always receives row ``k`` regardless of the batch size or of
how evaluation is later split across workers.
"""

from __future__ import annotations

import numpy as np

INIT = 0
CANDIDATES = 1
SDE_NOISE = 2
RRT = 3


def _key(seed: int) -> np.ndarray:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.array([seed, 0x9E3779B97F4A7C15], dtype=np.uint64)


def stream(seed: int, purpose: int, step: int = 0) -> np.random.Generator:
    counter = np.array([0, 0, int(step), int(purpose)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(seed), counter=counter))


def normal_batch(seed: int, purpose: int, step: int, n: int, d: int) -> np.ndarray:
    """Standard normal ``(n, d)`` block for one ``(seed, purpose, step)`` address."""
    return stream(seed, purpose, step).standard_normal((n, d))
