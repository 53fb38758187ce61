# flcleaner/core/parallel.py
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar
import logging

from flcleaner.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """Aplicar fn a cada elemento, conservando el orden de entrada."""
    items = list(items)
    workers = max_workers if max_workers is not None else settings.max_workers
    workers = max(1, min(workers, len(items) or 1))

    if workers == 1:
        return [fn(item) for item in items]

    # executor.map devuelve en orden de envío: las reducciones posteriores son deterministas
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="flcleaner") as executor:
        return list(executor.map(fn, items))
