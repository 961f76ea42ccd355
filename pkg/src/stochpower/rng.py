"""Counter-based random streams.

Every stochastic draw in the package comes from a Philox4x64-10 generator
(numpy's ``Philox`` bit generator) whose 128-bit key is ``(seed, run_index)``
and whose 256-bit counter starts at ``(0, entity, iteration, 0)``.  Numpy
increments the lowest counter word per block, so streams with distinct
``(entity, iteration)`` never overlap in practice.  Uniform doubles are
``(x >> 11) * 2**-53`` of successive 64-bit outputs.

Inside one stream the i-th draw belongs to the i-th walker (or entry) in the
documented iteration order, which is what makes trajectories independent of
how the work is scheduled.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# entity tags used by the solvers
ENTITY_FCIQMC = 0
ENTITY_COMPRESS = 1


def stream(seed: int, iteration: int = 0, entity: int = 0, run_index: int = 0) -> np.random.Generator:
    """Return the generator for ``(seed, run_index, iteration, entity)``."""
    key = np.array([seed & _MASK64, run_index & _MASK64], dtype=np.uint64)
    counter = np.array([0, entity & _MASK64, iteration & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))

