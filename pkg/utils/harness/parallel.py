"""
.. module:: parallel
   :platform: Python
   :synopsis: Deterministic process-pool mapping and index-ordered reduction.

Module `parallel` owns all concurrency of the lab. Tasks are pure functions of their index; results are
collected with an ordered ``Pool.imap`` and reduced in ascending index order, so the output never
depends on the worker count or on completion order.
"""

import logging
from functools import partial, reduce
from multiprocessing import Pool
from typing import Callable, List, TypeVar

from utils.errors import TaskFailedError

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def _run_indexed(task: Callable[[int], T], index: int) -> T:
    try:
        return task(index)
    except TaskFailedError:
        raise
    except Exception as e:
        raise TaskFailedError(index, f"{e.__class__.__name__}: {e}") from None


class ProcessMapper:
    """
    Mapper with the ``mapper(task, n_tasks) -> list`` contract backed by a process pool.

    :Example:

    .. code-block:: python

        mapper = ProcessMapper(worker_count=8)
        spectra = sample_spectra(config, 2000, mapper=mapper)
    """

    def __init__(self, worker_count: int = 1, chunksize: int = 0):
        """
        :param worker_count: Number of processes; ``1`` runs in the calling process.
        :type worker_count: int
        :param chunksize: Tasks per pool message; ``0`` picks one from the task count.
        :type chunksize: int
        """
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self.worker_count = max(1, int(worker_count))
        self.chunksize = chunksize

    def __call__(self, task: Callable[[int], T], n_tasks: int) -> List[T]:
        if n_tasks <= 0:
            return []
        runner = partial(_run_indexed, task)
        if self.worker_count == 1:
            return [runner(index) for index in range(n_tasks)]
        chunksize = self.chunksize or max(1, n_tasks // (4 * self.worker_count))
        self.logger.debug("Mapping %d tasks over %d workers (chunksize %d)", n_tasks, self.worker_count, chunksize)
        with Pool(processes=self.worker_count) as pool:
            try:
                return list(pool.imap(runner, range(n_tasks), chunksize=chunksize))
            except TaskFailedError as e:
                self.logger.error("Aborting run: %s", e)
                pool.terminate()
                raise

    def __repr__(self) -> str:
        return f"ProcessMapper(worker_count={self.worker_count})"


def parallel_map_reduce(
    task: Callable[[int], T],
    n_tasks: int,
    worker_count: int,
    reducer: Callable[[R, T], R],
    initial: R,
) -> R:
    """
    Evaluate ``task(0..n_tasks-1)`` and fold the results left to right with ``reducer``.

    :param task: Picklable pure function of the task index.
    :param n_tasks: Number of tasks; ``0`` returns ``initial``.
    :param worker_count: Number of processes.
    :param reducer: ``reducer(accumulator, result) -> accumulator``.
    :param initial: Identity of the reduction.
    :raises TaskFailedError: Naming the lowest failing index in iteration order.
    """
    results = ProcessMapper(worker_count)(task, n_tasks)
    return reduce(reducer, results, initial)
