#!/usr/bin/env python3

import os
from concurrent.futures import ThreadPoolExecutor, as_completed

from tqdm import tqdm

from .logging import Log

ENV_VAR = "HITCHIN_BVP_WORKERS"
_default_workers = None


def worker_count(requested=None):
    """Resolve the pool size from the request, the environment cap and the cpu count."""
    count = requested or _default_workers or os.cpu_count() or 1
    cap = os.environ.get(ENV_VAR)
    if cap:
        try:
            count = min(count, max(1, int(cap)))
        except ValueError:
            Log.warn(f"Ignoring non-integer {ENV_VAR}={cap!r}")
    return max(1, int(count))


def set_default_workers(count):
    global _default_workers
    _default_workers = count


def map_ordered(fn, items, workers=None, desc=None):
    """Apply `fn` to every item on a thread pool; results keep the input order.

    A progress bar is shown only when `desc` is given and logging is not quiet.
    """
    items = list(items)
    workers = min(worker_count(workers), max(1, len(items)))
    show = desc is not None and Log.enabled("info")
    if workers == 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not show)]

    results = [None] * len(items)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, item): i for i, item in enumerate(items)}
        for fut in tqdm(as_completed(futures), total=len(futures), desc=desc, disable=not show):
            results[futures[fut]] = fut.result()
    return results
