"""Counter-based random streams keyed by (seed, stream, time).

Every update step gets its own Philox generator whose key is derived from
``SeedSequence(seed, spawn_key=(stream, t))``.  Steps can therefore be
regenerated in any order, and replicas never share state.
"""

from __future__ import annotations

import numpy as np

# Stream-id namespaces, so different consumers never collide.
UPDATES = 0
FRESH = 1 << 20
STARTS = 2 << 20
MISC = 3 << 20


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the key path ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def step_stream(seed: int, t: int, replica: int = 0) -> np.random.Generator:
    """Generator for update step ``t`` of replica ``replica``."""
    return stream(seed, UPDATES + replica, t)
