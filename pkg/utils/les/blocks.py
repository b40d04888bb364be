"""
.. module:: blocks
   :platform: Python
   :synopsis: Block-diagonal reduction of the rescaled eigenvalue process and the array criteria for Poisson limits.

The index range ``[-N, N]`` is cut into consecutive blocks of length ``n``; leftover indices (fewer than
one block) are dropped. Blocks are principal sub-matrices of one sample and share no entries, so they
are independent. All block eigenvalues are rescaled by the full factor ``2N+1``.
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import List, Tuple

import numpy as np

from utils.ensemble.band_matrix import EnsembleConfig, sample_band_matrix
from utils.errors import InvalidConfigError
from utils.les.point_process import PointProcessRealization, Window
from utils.linalg.eigen import eigenvalues_banded
from utils.mapping import Mapper, serial_map

logger = logging.getLogger(__name__)


def block_length(half_size: int, alpha: float) -> int:
    """
    ``min(2N+1, round((2N+1)^alpha))`` for ``alpha`` in ``(0, 1]``.
    """
    if not 0.0 < alpha <= 1.0:
        raise InvalidConfigError(f"alpha must lie in (0, 1], got {alpha}")
    order = 2 * half_size + 1
    return min(order, max(1, int(round(order**alpha))))


def _block_points(config: EnsembleConfig, E0: float, window: Window, alpha: float, sample_index: int) -> List[np.ndarray]:
    n = block_length(config.half_size, alpha)
    if n < 2 * config.bandwidth_half + 1:
        raise InvalidConfigError(f"block length {n} is below the bandwidth 2L+1 = {2 * config.bandwidth_half + 1}")
    H = sample_band_matrix(config, sample_index)
    scale = config.order
    per_block = []
    for p in range(config.order // n):
        lo = -config.half_size + p * n
        block = H.principal_submatrix(lo, lo + n - 1)
        scaled = scale * (eigenvalues_banded(block).eigenvalues - E0)
        per_block.append(np.sort(scaled[window.mask(scaled)]))
    return per_block


def block_superposed_process(config: EnsembleConfig, E0: float, window: Window, alpha: float, sample_index: int) -> PointProcessRealization:
    """
    Superposition of the rescaled eigenvalues of independent diagonal blocks of one sample.

    :param config: Ensemble.
    :param E0: Reference energy.
    :param window: Window in rescaled units.
    :param alpha: Block exponent, block length ``~ (2N+1)^alpha``.
    :param sample_index: Sample whose blocks are used.
    :raises InvalidConfigError: If the block length is below ``2L+1``.
    """
    points = np.sort(np.concatenate(_block_points(config, E0, window, alpha, sample_index)))
    return PointProcessRealization(float(E0), tuple(float(x) for x in points), window, config.half_size, config.bandwidth_half, sample_index)


def block_counts_task(config: EnsembleConfig, E0: float, window: Window, alpha: float, index: int) -> np.ndarray:
    return np.array([len(points) for points in _block_points(config, E0, window, alpha, index)], dtype=np.int64)


@dataclass(frozen=True)
class DvjReport:
    """
    Array conditions for a Poisson limit of a superposition of independent point processes.

    ``negligibility``: ``max_p P{xi_p(A) >= 1}``, tends to 0.
    ``uniqueness``: ``sum_p P{xi_p(A) >= 2}``, tends to 0.
    ``intensity``: ``sum_p P{xi_p(A) >= 1}``, tends to ``n |A|``.
    """

    negligibility: float
    uniqueness: float
    intensity: float
    blocks: int
    sample_count: int


def dvj_criteria(block_counts) -> DvjReport:
    """
    :param block_counts: Counts of shape ``(samples, blocks)``.
    """
    counts = np.asarray(block_counts)
    if counts.ndim != 2 or counts.shape[0] == 0:
        raise InvalidConfigError("block counts must be a non-empty (samples, blocks) array")
    at_least_one = (counts >= 1).mean(axis=0)
    at_least_two = (counts >= 2).mean(axis=0)
    return DvjReport(
        negligibility=float(at_least_one.max()) if counts.shape[1] else 0.0,
        uniqueness=float(at_least_two.sum()),
        intensity=float(at_least_one.sum()),
        blocks=int(counts.shape[1]),
        sample_count=int(counts.shape[0]),
    )


def block_dvj(
    config: EnsembleConfig, E0: float, window: Window, alpha: float, sample_count: int, mapper: Mapper = serial_map
) -> Tuple[DvjReport, np.ndarray]:
    """
    Sample block counts and evaluate :func:`dvj_criteria`; also returns the per-sample total counts.
    """
    counts = np.stack(mapper(partial(block_counts_task, config, E0, window, alpha), sample_count))
    return dvj_criteria(counts), counts.sum(axis=1)
