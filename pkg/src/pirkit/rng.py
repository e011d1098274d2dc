"""Counter-based random streams.

Every draw in pirkit comes from a Philox generator whose key is built from
``(seed, chain, lane)`` and whose counter is offset by a block index. A block
of draws can therefore be regenerated on its own, in any order and on any
thread, and the numbers never depend on how work was scheduled.

Lanes separate unrelated consumers sharing one seed (mode coefficients of the
Gaussian loop measure, Langevin noise, Metropolis uniforms).
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "LANE_NU", "LANE_LANGEVIN", "LANE_ACCEPT", "LANE_START", "LANE_PROBE"]

LANE_NU = 1
LANE_LANGEVIN = 2
LANE_ACCEPT = 3
LANE_START = 4
LANE_PROBE = 5

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


def stream(seed: int, chain: int = 0, block: int = 0, lane: int = 0) -> np.random.Generator:
    """Return the generator for one ``(seed, chain, lane)`` stream at ``block``.

    Philox increments its 256-bit counter from the low word, so placing the
    block index in the third word gives each block 2**128 draws before it
    could run into the next one.
    """
    if seed < 0 or chain < 0 or block < 0 or lane < 0:
        raise ValueError("seed, chain, block and lane must be non-negative")
    key = (int(seed) & _MASK64) | ((int(chain) & _MASK32) << 64) | ((int(lane) & _MASK32) << 96)
    counter = (int(block) & _MASK64) << 128
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
