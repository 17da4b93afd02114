"""Order-preserving parallel map shared by forests, folds, trials and arms.

Results always come back in input order and every task derives its own RNG,
so the thread count never changes outputs.
"""
import contextlib
import threading
from concurrent.futures import ThreadPoolExecutor

_state = threading.local()
_default_threads = 1


def set_threads(n: int) -> None:
    global _default_threads
    _default_threads = max(1, int(n))


def get_threads() -> int:
    # nested calls run serially to avoid oversubscription
    if getattr(_state, "inside", False):
        return 1
    return _default_threads


@contextlib.contextmanager
def threads(n: int):
    global _default_threads
    old = _default_threads
    _default_threads = max(1, int(n))
    try:
        yield
    finally:
        _default_threads = old


def _run(fn, item):
    _state.inside = True
    try:
        return fn(item)
    finally:
        _state.inside = False


def pmap(fn, items):
    items = list(items)
    n = get_threads()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(lambda it: _run(fn, it), items))
