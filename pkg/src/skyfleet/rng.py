"""Seeded random substreams.

All randomness in a run flows from one 64-bit seed through named,
counter-based Philox substreams. Each concern (world layout, user
sampling, action exploration, observation noise, user dynamics) owns its
own stream, so toggling one feature never shifts the draws seen by
another and module-level reproducibility survives configuration changes.
"""

import numpy as np

# Substream ids; part of the reproducibility contract.
STREAM_WORLD = 0
STREAM_USERS = 1
STREAM_RL = 2
STREAM_NOISE = 3
STREAM_DYNAMICS = 4


def stream(seed: int, stream_id: int) -> np.random.Generator:
    """Return the generator for one named substream of a run seed."""
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream_id)]
    return np.random.Generator(np.random.Philox(key=key))
