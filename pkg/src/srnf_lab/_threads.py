"""Parallelism cap read from SRNF_LAB_THREADS."""
import contextlib
import os

from threadpoolctl import threadpool_limits

ENV = "SRNF_LAB_THREADS"


def thread_cap():
    """Positive thread count from the environment, or None when unset."""
    raw = os.environ.get(ENV, "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return n if n > 0 else None


def n_workers():
    """``workers`` argument for scipy routines: the cap, or -1 for all cores."""
    cap = thread_cap()
    return -1 if cap is None else cap


@contextlib.contextmanager
def limited():
    """Cap BLAS/OpenMP pools for the duration of the block."""
    cap = thread_cap()
    if cap is None:
        yield
    else:
        with threadpool_limits(limits=cap):
            yield
