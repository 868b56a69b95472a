"""Named, counter-based random substreams.

Every random draw in the package comes from ``substream(seed, name, *index)``
so that a frame can be generated on any thread, in any order, and still see
exactly the same numbers.
"""

import zlib

import numpy as np


def substream(seed, name, *index):
    tag = zlib.crc32(name.encode("utf-8"))
    entropy = [int(seed), tag, *(int(i) for i in index)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
