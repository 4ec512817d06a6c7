"""Seedable random streams.

Every random draw in an experiment comes from a PCG64 generator whose
``SeedSequence`` is keyed by the master seed plus a spawn key naming the
consumer, so results do not depend on execution order or worker count:

* ``(run, STREAM_INIT)`` - initial parameters of run ``run``;
* ``(run, STREAM_OPTIMIZER)`` - optimizer randomness (SPSA perturbations);
* ``(run, STREAM_SHOTS, evaluation, group)`` - shots of one measurement group
  in one cost evaluation;
* ``(run, STREAM_MONITOR, iteration, group)`` - shots of the per-iteration
  energy readout that is recorded but never fed to the optimizer.
"""

from __future__ import annotations

import numpy as np

STREAM_INIT = 0
STREAM_OPTIMIZER = 1
STREAM_SHOTS = 2
STREAM_MONITOR = 3


def make_rng(master_seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def as_generator(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))
