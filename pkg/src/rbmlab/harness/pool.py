"""Worker pool over independent Monte Carlo units."""
import os
from concurrent.futures import ThreadPoolExecutor


def pool_size() -> int:
    raw = os.environ.get("RBMLAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        size = int(raw)
    except ValueError:
        raise ValueError(f"RBMLAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, size)


def pool_map(fn, items) -> list:
    """Apply ``fn`` to every item; results come back in input order, so the
    output does not depend on the pool size."""
    items = list(items)
    size = min(pool_size(), len(items)) if items else 1
    if size <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=size) as ex:
        return list(ex.map(fn, items))
