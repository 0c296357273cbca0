"""Seed streams and a deterministic worker pool for Monte Carlo trials."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

THREADS_ENV = "ORTHOFIELD_THREADS"


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        return max(1, int(value))
    return 1


def trial_rng(master: int, *path: int) -> np.random.Generator:
    """Independent generator for the stream (master, *path).

    The stream depends only on the key, never on which worker runs it.
    """
    seq = np.random.SeedSequence(entropy=int(master) & (2 ** 64 - 1), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.PCG64(seq))


def chunk_ranges(n: int, n_chunks: int) -> list[range]:
    n_chunks = max(1, min(n_chunks, n)) if n else 1
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def map_trials(
    func: Callable[[int], np.ndarray | float],
    n_trials: int,
    threads: int | None = None,
) -> np.ndarray:
    """Evaluate ``func(trial)`` for every trial and stack results in trial order.

    Results are placed by trial index, so the output is identical for any
    thread count.
    """
    threads = default_threads() if threads is None else max(1, int(threads))

    def run(chunk: range) -> list:
        return [func(k) for k in chunk]

    chunks = chunk_ranges(n_trials, threads * 4 if threads > 1 else 1)
    if threads == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    flat = [item for part in parts for item in part]
    return np.asarray(flat)


def dkw_epsilon(n: int, alpha: float = 0.01) -> float:
    """Uniform band half-width for an empirical CDF from ``n`` samples."""
    return float(np.sqrt(np.log(2.0 / alpha) / (2.0 * n)))
