"""Counter-based random streams.

Every noise port of every synthesis block gets its own Philox generator keyed
by (seed, salt, block, port), so records are bit-reproducible, blocks can be
generated in any order (or in parallel), and LO-sign-flipped records can share
their physical-noise streams while acquisition artifacts differ.
"""

from __future__ import annotations

import numpy as np

# port codes
SHOT = 1
LOSS = 2
THERMAL = 3
DRIFT = 4
CARRIER = 5
COMB = 6


def stream(seed: int, salt: int, block: int, port: int) -> np.random.Generator:
    counter = np.array([0, np.uint64(salt), np.uint64(block), np.uint64(port)],
                       dtype=np.uint64)
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(0x9E3779B97F4A7C15)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def complex_normal(gen: np.random.Generator, n: int) -> np.ndarray:
    """n iid complex Gaussians with E|z|^2 = 1."""
    z = gen.standard_normal(2 * n)
    return (z[0::2] + 1j * z[1::2]) / np.sqrt(2.0)
