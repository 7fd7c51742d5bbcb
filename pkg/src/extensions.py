"""Shared process-wide helpers (logging setup, worker pool) to avoid circular imports."""
from __future__ import annotations

import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar

T = TypeVar('T')
R = TypeVar('R')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def init_logging(level: str = 'INFO') -> logging.Logger:
    """Route package logs to stderr; stdout is reserved for data."""
    root = logging.getLogger('src')
    if not any(getattr(h, '_ptycho', False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._ptycho = True  # type: ignore[attr-defined]
        root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
    return root


def ordered_map(func: Callable[[T], R], items: Sequence[T] | Iterable[T], threads: int = 1) -> List[R]:
    """Map over items in a thread pool; results come back in input order regardless of completion order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
