import multiprocessing
from typing import Callable, Iterable, List, TypeVar

from service.logger import logger

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """
    Применяет fn к items с сохранением порядка.
    При threads > 1 работает через multiprocessing.Pool; fn и элементы должны сериализоваться.
    """
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]

    n_workers = min(threads, len(items))
    logger.debug(f"Запуск пула из {n_workers} процессов на {len(items)} задач")
    with multiprocessing.Pool(n_workers) as pool:
        return pool.map(fn, items)
