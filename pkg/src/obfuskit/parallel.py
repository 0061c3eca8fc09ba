"""Order-preserving process pool for independent, seed-driven tasks."""

import os
from concurrent.futures import ProcessPoolExecutor

ENV_THREADS = "OBFUSKIT_THREADS"


def resolve_workers(workers=None):
    """``workers`` if given, else ``$OBFUSKIT_THREADS``; 0 means one per CPU."""
    if workers is None:
        raw = os.environ.get(ENV_THREADS, "1").strip() or "1"
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    if workers < 0:
        raise ValueError("worker count must be >= 0")
    return workers or (os.cpu_count() or 1)


def parallel_map(fn, items, workers=None):
    """``[fn(x) for x in items]``, optionally across processes.

    Results come back in input order; every task must derive its
    randomness from its own arguments for the output to be schedule-free.
    """
    items = list(items)
    workers = min(resolve_workers(workers), max(len(items), 1))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
