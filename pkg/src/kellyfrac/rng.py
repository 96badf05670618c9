"""Counter-based random substreams.

One master seed yields a Philox key; work unit ``i`` (a simulated path or a
bootstrap replicate) gets its own generator whose counter starts at ``i`` in
the third 64-bit word. Unit ``i`` can therefore be regenerated in isolation,
and results never depend on how units are spread across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

SEED_MAX = 2**64 - 1


def master_key(seed: int) -> np.ndarray:
    if not 0 <= int(seed) <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)


def substream(seed: int, index: int, key: np.ndarray | None = None) -> np.random.Generator:
    """Generator for work unit ``index`` under master ``seed``."""
    if key is None:
        key = master_key(seed)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, int(index), 0]))


def map_units(fn, n_units: int, workers: int = 1, chunk: int = 256) -> list:
    """Apply ``fn(start, stop)`` over contiguous unit blocks, in order.

    ``fn`` must return a sequence of per-unit results; the concatenated list
    is independent of ``workers``.
    """
    bounds = [(s, min(s + chunk, n_units)) for s in range(0, n_units, chunk)]
    if workers <= 1 or len(bounds) <= 1:
        parts = [fn(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), bounds))
    out = []
    for p in parts:
        out.extend(p)
    return out
