"""
Worker pools used for the per-aircraft fits and the pairwise conflict checks.
Results always come back in input order, whatever the scheduling.

Fitting is pure Python and holds the GIL, so it runs on processes; the
pair checks share counters with the caller and run on threads.
"""

import logging
import multiprocessing
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    """Thin wrapper over a thread or process pool; runs inline with a single worker"""

    def __init__(self, workers: int = 1, processes: bool = False):
        self.workers = max(1, int(workers))
        self.processes = processes
        self._executor: Optional[Executor] = None
        if self.workers > 1:
            if processes:
                # spawn: the planner's thread pool may already be running
                context = multiprocessing.get_context("spawn")
                self._executor = ProcessPoolExecutor(max_workers=self.workers, mp_context=context)
            else:
                self._executor = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="dubins-fleet")
            kind = "process" if processes else "thread"
            logger.debug(f"Started {kind} pool with {self.workers} workers")

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply fn to every item, preserving order; fn must be picklable on a process pool"""
        if self._executor is None:
            return [fn(item) for item in items]
        return list(self._executor.map(fn, items))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
