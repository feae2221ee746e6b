"""Counter-based random streams.

Every stochastic routine in the package derives its generator from
``stream(seed, *key)``.  Philox is counter-based, so streams with distinct
keys are independent and the draw order inside one routine never affects
any other routine.  This is what makes datasets byte-reproducible even if
callers parallelize rendering.
"""

import numpy as np

# Fixed tags so unrelated draws never share a stream by accident.
TAG_NOISE_VARS = 1
TAG_SHIFTS = 2
TAG_ENV = 3
TAG_SPLIT = 4
TAG_SEQUENCE = 5
TAG_EVAL = 6
TAG_INIT = 7
TAG_SHUFFLE = 8
TAG_FEATURES = 9
TAG_SELECT = 10


def stream(seed, *key):
    """Return an independent Generator keyed by (seed, *key)."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))
