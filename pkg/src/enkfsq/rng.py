"""Named, reproducible random number streams.

Every stochastic draw in the package comes from a stream derived from a
(seed, name, ...) key, so that repeating a run with the same seed replays the
exact same numbers regardless of how many other streams were consumed in
between, or on how many worker threads the runs were scheduled.
"""

import zlib

import numpy as np


def substream(seed, *path):
    """Return a Generator for the stream identified by ``(seed, *path)``.

    ``path`` elements may be strings or integers; they are hashed into the
    seed material, so distinct keys give statistically independent streams
    and the same key always gives the same stream.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    entropy = [int(seed)]
    for part in path:
        entropy.append(zlib.crc32(repr(part).encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(entropy))
