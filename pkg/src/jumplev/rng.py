"""Counter-based random streams.

Every random draw in the package comes from ``stream(root, *key)``. The key
is a tuple of small integers such as ``(cell, replication, stage)``, so a
replication produces the same numbers whether it runs first, last, serially
or inside a worker process.
"""

import numpy as np


def stream(root: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))
