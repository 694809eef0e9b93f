"""Seeded random streams.

Every random draw in the package goes through a Philox counter-based bit
generator so that results do not depend on call order across processes.
Child streams are addressed by integer keys, e.g. ``(instance, protocol,
setting, restart)``.
"""

from __future__ import annotations

import numpy as np

RNG_NAME = "numpy.Philox4x64-10"
RNG_VERSION = f"{RNG_NAME}/numpy-{np.__version__.split('.')[0]}"


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for ``seed`` and an optional integer stream key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 32-bit seed for kernels that carry their own generator (numba)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
