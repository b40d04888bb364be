"""
Index-ordered mapping used by every Monte Carlo estimator.

Estimators never start workers themselves. They take a ``mapper`` with the signature
``mapper(task, n_tasks) -> list`` whose result list is ordered by task index. The serial
mapper below is the default; the harness supplies a process-pool mapper with the same contract.
"""

from typing import Callable, List, Protocol, TypeVar

T = TypeVar("T")


class Mapper(Protocol):
    def __call__(self, task: Callable[[int], T], n_tasks: int) -> List[T]: ...


def serial_map(task: Callable[[int], T], n_tasks: int) -> List[T]:
    """
    Run ``task(0), ..., task(n_tasks - 1)`` in the calling process.

    :param task: Pure function of the task index.
    :param n_tasks: Number of tasks.
    :return: Results in ascending index order.
    """
    return [task(index) for index in range(n_tasks)]
