"""Named random substreams derived from one run seed.

Every source of randomness (parameter init, dropout, sampling, ...)
draws from its own child stream so that toggling one feature never
shifts another's sequence.
"""
from __future__ import annotations

import numpy as np

_STREAMS = {"init": 0, "dropout": 1, "sampling": 2, "data": 3, "check": 4}


def substream(seed: int, name: str) -> np.random.Generator:
    if name not in _STREAMS:
        raise KeyError(f"unknown rng stream {name!r}; known: {sorted(_STREAMS)}")
    return np.random.default_rng(np.random.SeedSequence((seed, _STREAMS[name])))
