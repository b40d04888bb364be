"""
.. module:: point_process
   :platform: Python
   :synopsis: Rescaled eigenvalue point processes and their window counts.

Eigenvalues near ``E0`` are mapped to ``(2N+1)(lambda - E0)``; windows are half-open ``[a, b)`` so
counts over disjoint adjacent windows add up exactly.
"""

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import polars as pl

from utils.ensemble.band_matrix import EnsembleConfig, sample_band_matrix
from utils.errors import InvalidConfigError
from utils.linalg.eigen import SpectralDecomposition, eigenvalues_banded
from utils.mapping import Mapper, serial_map
from utils.statistics import jackknife_mean

logger = logging.getLogger(__name__)

MIN_REALIZATIONS = 1000


@dataclass(frozen=True)
class Window:
    """
    Half-open interval ``[a, b)``.
    """

    a: float
    b: float

    def __post_init__(self):
        if not self.b >= self.a:
            raise InvalidConfigError(f"window [{self.a}, {self.b}) is reversed")

    @classmethod
    def centered(cls, center: float, length: float) -> "Window":
        return cls(center - 0.5 * length, center + 0.5 * length)

    @property
    def length(self) -> float:
        return self.b - self.a

    def mask(self, x: np.ndarray) -> np.ndarray:
        return (x >= self.a) & (x < self.b)

    def count(self, points) -> int:
        return int(np.count_nonzero(self.mask(np.asarray(points, dtype=float))))


@dataclass(frozen=True)
class PointProcessRealization:
    """
    Rescaled eigenvalues ``(2N+1)(E - E0)`` of one sample that fall in ``window``.
    """

    E0: float
    points: Tuple[float, ...]
    window: Window
    N: int
    L: int
    sample_index: int = 0

    @property
    def count(self) -> int:
        return len(self.points)

    def unrescaled(self) -> np.ndarray:
        return self.E0 + np.asarray(self.points) / (2 * self.N + 1)

    def count_in(self, window: Window) -> int:
        return window.count(self.points)

    def gaps(self) -> np.ndarray:
        return np.diff(np.sort(np.asarray(self.points, dtype=float)))

    def to_record(self) -> dict:
        return {"sample_index": self.sample_index, "N": self.N, "L": self.L, "E0": self.E0, "points": list(self.points)}


def rescale_eigenvalues(
    spectrum: SpectralDecomposition, E0: float, N: int, window: Window, L: int = 0, sample_index: int = 0
) -> PointProcessRealization:
    """
    Points ``(2N+1)(lambda_j - E0)`` that lie in ``[a, b)``, ascending.

    :param spectrum: Eigenvalues of a matrix of order ``2N+1`` (or of blocks of one).
    :param E0: Reference energy.
    :param N: Half size giving the scale ``2N+1``.
    :param window: Window in rescaled units.
    """
    scaled = (2 * N + 1) * (np.asarray(spectrum.eigenvalues, dtype=float) - E0)
    inside = np.sort(scaled[window.mask(scaled)])
    return PointProcessRealization(float(E0), tuple(float(x) for x in inside), window, N, L, sample_index)


def realization_task(config: EnsembleConfig, E0: float, window: Window, index: int) -> PointProcessRealization:
    spectrum = eigenvalues_banded(sample_band_matrix(config, index))
    return rescale_eigenvalues(spectrum, E0, config.half_size, window, config.bandwidth_half, index)


def sample_realizations(
    config: EnsembleConfig, E0: float, window: Window, sample_count: int, mapper: Mapper = serial_map
) -> List[PointProcessRealization]:
    return mapper(partial(realization_task, config, E0, window), sample_count)


@dataclass(frozen=True)
class CountStatistics:
    """
    Distribution of the window count over realizations.

    ``factorial_moments[m-1]`` is ``E k(k-1)...(k-m+1)`` for ``m = 1, 2, 3``; ``gaps`` pools
    consecutive spacings inside the window.
    """

    window: Window
    histogram: Dict[int, int]
    realization_count: int
    mean: float
    factorial_moments: Tuple[float, float, float]
    factorial_stderr: Tuple[float, float, float]
    gaps: np.ndarray = field(default_factory=lambda: np.empty(0))

    @classmethod
    def from_counts(cls, counts: Sequence[int], window: Window, gaps: Optional[np.ndarray] = None) -> "CountStatistics":
        counts = np.asarray(counts, dtype=np.int64)
        if counts.size < MIN_REALIZATIONS:
            raise InvalidConfigError(f"count statistics need at least {MIN_REALIZATIONS} realizations, got {counts.size}")
        values, frequencies = np.unique(counts, return_counts=True)
        histogram = {int(k): int(f) for k, f in zip(values, frequencies)}
        k = counts.astype(float)
        falling = np.column_stack([k, k * (k - 1), k * (k - 1) * (k - 2)])
        means, errors = jackknife_mean(falling)
        mean = float(np.sum(values * frequencies)) / counts.size
        return cls(
            window=window,
            histogram=histogram,
            realization_count=int(counts.size),
            mean=mean,
            factorial_moments=(mean, float(means[1]), float(means[2])),
            factorial_stderr=tuple(float(e) for e in errors),
            gaps=np.empty(0) if gaps is None else np.asarray(gaps, dtype=float),
        )

    def probability_at_least(self, k: int) -> float:
        return sum(f for c, f in self.histogram.items() if c >= k) / self.realization_count

    def to_frame(self) -> pl.DataFrame:
        keys = sorted(self.histogram)
        return pl.DataFrame({"k": keys, "frequency": [self.histogram[k] for k in keys]})


def count_statistics(realizations: Sequence[PointProcessRealization], window: Optional[Window] = None) -> CountStatistics:
    """
    Histogram, mean and factorial moments of the counts in a common window.

    :param realizations: At least 1000 realizations.
    :param window: Sub-window to count in; the realizations' own window by default.
    :raises InvalidConfigError: With too few realizations or mixed windows.
    """
    if not realizations:
        raise InvalidConfigError("no realizations")
    if window is None:
        windows = {r.window for r in realizations}
        if len(windows) != 1:
            raise InvalidConfigError("realizations do not share a window")
        window = windows.pop()
    counts, gaps = [], []
    for realization in realizations:
        points = np.asarray(realization.points, dtype=float)
        inside = points[window.mask(points)]
        counts.append(inside.size)
        if inside.size > 1:
            gaps.append(np.diff(np.sort(inside)))
    pooled = np.concatenate(gaps) if gaps else np.empty(0)
    return CountStatistics.from_counts(counts, window, pooled)
