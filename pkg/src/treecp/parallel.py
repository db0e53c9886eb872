"""Deterministic trial dispatch.

Trials are cut into fixed-size chunks whose boundaries do not depend on
the worker count, each chunk is processed by a pure function of its seeds,
and results are reassembled in chunk order.  Numba kernels release the
GIL, so a thread pool gives real parallelism without changing results.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from ._rng import trial_seeds

CHUNK = 256


def default_workers() -> int:
    return int(os.environ.get("TREECP_WORKERS", "1"))


def map_trials(fn: Callable[[np.ndarray], Sequence], master_seed: int, n_trials: int,
               workers: int | None = None, chunk: int = CHUNK) -> list:
    """Apply ``fn`` to consecutive seed chunks and concatenate the per-trial
    results in trial order."""
    seeds = trial_seeds(master_seed, n_trials)
    chunks = [seeds[i:i + chunk] for i in range(0, n_trials, chunk)]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(chunks) <= 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, chunks))
    out: list = []
    for p in parts:
        out.extend(p)
    return out


def per_trial(fn: Callable[[int], object]) -> Callable[[np.ndarray], list]:
    """Lift a one-seed function to a chunk function."""

    def run(chunk: np.ndarray) -> list:
        return [fn(int(s)) for s in chunk]

    return run
