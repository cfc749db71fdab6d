"""Counter-based random streams.

Every random quantity in an experiment comes from a stream keyed by
``(seed, purpose, *indices)``, so any trial can be regenerated on its own and
trials can run in any order or in parallel.
"""

import numpy as np

_PURPOSES = {
    "rrh": 1,
    "train_users": 2,
    "test_users": 3,
    "shadowing": 4,
    "nagp": 5,
    "restarts": 6,
    "geometry": 7,
    "training": 8,
}


def _key(purpose, indices):
    try:
        tag = _PURPOSES[purpose]
    except KeyError:
        raise ValueError(f"unknown random stream purpose {purpose!r}") from None
    return (tag,) + tuple(int(i) for i in indices)


def stream(seed, purpose, *indices):
    """Return an independent ``numpy.random.Generator`` for one purpose."""
    ss = np.random.SeedSequence(int(seed), spawn_key=_key(purpose, indices))
    return np.random.default_rng(ss)


def derive_seed(seed, purpose, *indices):
    """Derive a child integer seed (uint64) from ``seed`` and a key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=_key(purpose, indices))
    return int(ss.generate_state(1, np.uint64)[0])
