"""Deterministic random substreams.

Every random draw in an experiment comes from
``SeedSequence(root_seed, spawn_key=(experiment, repetition, unit))``, where
``unit`` is the cell, batch or level index. Results therefore do not depend on
the order in which repetitions are executed.
"""

from __future__ import annotations

import zlib

import numpy as np

EXPERIMENTS = {"ci": 1, "monitor": 2, "conformal": 3, "validate": 4, "data": 5}


def experiment_id(name: str) -> int:
    return EXPERIMENTS.get(name, zlib.crc32(name.encode()))


def substream(root_seed: int, experiment: str, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(root_seed), spawn_key=(experiment_id(experiment),) + tuple(int(k) for k in keys))
    return np.random.default_rng(ss)
