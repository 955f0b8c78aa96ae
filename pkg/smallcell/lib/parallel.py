from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from smallcell.lib.logging_config import get_logger

T = TypeVar("T")
R = TypeVar("R")

logger = get_logger(__name__)


def default_workers() -> int:
    value = (os.getenv("SMALLCELL_WORKERS") or "").strip()
    return int(value) if value.isdigit() and int(value) > 0 else 1


def ordered_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """
    Apply ``func`` to every item and return results in input order.

    Runs inline for a single worker; otherwise ``func`` and the items must be
    picklable (module-level functions, ``functools.partial`` of them).
    """
    items = list(items)
    n_workers = default_workers() if workers is None else workers
    if n_workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.debug("Dispatching to process pool", extra={"workers": n_workers, "items": len(items)})
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(func, items))
