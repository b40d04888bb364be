"""
.. module:: estimates
   :platform: Python
   :synopsis: Empirical Wegner, Minami and factorial-moment estimates of eigenvalue counts.

Bounds use the bandwidth factor ``max(L, 1)^{1/2}``; the Wegner bound is
``pi ||rho||_inf L^{1/2} (2N+1) |I|`` and the Minami bound its square.
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Tuple, Union

import numpy as np

from utils.ensemble.band_matrix import EnsembleConfig, sample_band_matrix
from utils.errors import InvalidConfigError
from utils.les.point_process import MIN_REALIZATIONS, CountStatistics, Window
from utils.linalg.eigen import eigenvalues_banded
from utils.mapping import Mapper, serial_map
from utils.statistics import binomial_stderr, jackknife_mean

logger = logging.getLogger(__name__)


def bandwidth_factor(bandwidth_half: int) -> float:
    return math.sqrt(max(bandwidth_half, 1))


def wegner_bound(sup_norm: float, bandwidth_half: int, half_size: int, length: float) -> float:
    """
    ``pi ||rho||_inf L^{1/2} (2N+1) |I|``.

    :Example:

    .. code-block:: python

        wegner_bound(1 / math.sqrt(2 * math.pi), 1, 10, 0.01)   # 0.2632...
    """
    return math.pi * sup_norm * bandwidth_factor(bandwidth_half) * (2 * half_size + 1) * length


def minami_bound(sup_norm: float, bandwidth_half: int, half_size: int, length: float) -> float:
    return wegner_bound(sup_norm, bandwidth_half, half_size, length) ** 2


@dataclass(frozen=True)
class WegnerMinamiReport:
    interval: Tuple[float, float]
    sample_count: int
    probability_nonempty: float
    probability_stderr: float
    mean_count: float
    mean_stderr: float
    factorial_moments: Tuple[float, float, float]
    factorial_stderr: Tuple[float, float, float]
    wegner_bound: float
    minami_bound: float
    fitted_constant: float
    generalized_bounds: Tuple[float, float, float]

    def wegner_holds(self, sigmas: float = 3.0) -> bool:
        return self.mean_count - sigmas * self.mean_stderr <= self.wegner_bound

    def minami_holds(self, sigmas: float = 3.0) -> bool:
        return self.factorial_moments[1] - sigmas * self.factorial_stderr[1] <= self.minami_bound

    def generalized_holds(self, sigmas: float = 3.0) -> bool:
        """
        Third factorial moment against ``(C L^{1/2} (2N+1) |I|)^3`` with ``C`` fitted on orders 1 and 2.
        """
        return self.factorial_moments[2] - sigmas * self.factorial_stderr[2] <= self.generalized_bounds[2]

    def markov_holds(self) -> bool:
        return self.probability_nonempty <= self.mean_count


def count_task(config: EnsembleConfig, lo: float, hi: float, index: int) -> int:
    eigenvalues = eigenvalues_banded(sample_band_matrix(config, index)).eigenvalues
    return int(np.count_nonzero((eigenvalues >= lo) & (eigenvalues < hi)))


def fitted_minami_constant(factorial_moments, scale: float, orders: Tuple[int, ...] = (1, 2)) -> float:
    """
    Smallest ``C`` with ``F_m <= (C * scale)^m`` for the given orders, ``scale = L^{1/2} (2N+1) |I|``.
    """
    return max(max(factorial_moments[m - 1], 0.0) ** (1.0 / m) for m in orders) / scale


def wegner_minami_empirical(
    config: EnsembleConfig,
    interval: Union[Tuple[float, float], Window],
    sample_count: int,
    mapper: Mapper = serial_map,
) -> WegnerMinamiReport:
    """
    Empirical ``P{Tr P_I >= 1}``, ``E Tr P_I`` and factorial moments up to order 3 with their bounds.

    :param config: Ensemble.
    :param interval: Bounded interval ``[lo, hi)`` in energy units.
    :param sample_count: At least 1000 matrices.
    :param mapper: Per-sample mapper.
    """
    window = interval if isinstance(interval, Window) else Window(float(interval[0]), float(interval[1]))
    if window.length <= 0 or not np.isfinite(window.length):
        raise InvalidConfigError(f"interval [{window.a}, {window.b}) must be bounded and nonempty")
    if sample_count < MIN_REALIZATIONS:
        raise InvalidConfigError(f"Wegner/Minami estimates need at least {MIN_REALIZATIONS} samples, got {sample_count}")
    counts = np.asarray(mapper(partial(count_task, config, window.a, window.b), sample_count))
    stats = CountStatistics.from_counts(counts, window)
    nonempty = int(np.count_nonzero(counts >= 1))
    _, mean_stderr = jackknife_mean(counts.astype(float))

    sup_norm = config.density.sup_norm
    n, big_l = config.half_size, config.bandwidth_half
    scale = bandwidth_factor(big_l) * (2 * n + 1) * window.length
    constant = fitted_minami_constant(stats.factorial_moments, scale)
    report = WegnerMinamiReport(
        interval=(window.a, window.b),
        sample_count=sample_count,
        probability_nonempty=nonempty / sample_count,
        probability_stderr=float(binomial_stderr(nonempty, sample_count)),
        mean_count=stats.mean,
        mean_stderr=mean_stderr,
        factorial_moments=stats.factorial_moments,
        factorial_stderr=stats.factorial_stderr,
        wegner_bound=wegner_bound(sup_norm, big_l, n, window.length),
        minami_bound=minami_bound(sup_norm, big_l, n, window.length),
        fitted_constant=constant,
        generalized_bounds=tuple((constant * scale) ** m for m in (1, 2, 3)),
    )
    logger.info(
        "Wegner/Minami N=%d L=%d |I|=%.4g: E k=%.4g (bound %.4g), E k(k-1)=%.4g (bound %.4g)",
        n,
        big_l,
        window.length,
        report.mean_count,
        report.wegner_bound,
        report.factorial_moments[1],
        report.minami_bound,
    )
    return report


@dataclass(frozen=True)
class MinamiGapCheck:
    tau: float
    gap: float
    stderr: float
    holds: bool


def minami_gap_check(stats: CountStatistics, tau: float = None, sigmas: float = 3.0) -> MinamiGapCheck:
    """
    ``|E k - P{k >= 1}| <= tau + 3 stderr`` whenever ``E k(k-1) <= tau``.

    ``tau`` defaults to the measured ``E k(k-1)``; a ``tau`` below it makes the check vacuous.
    """
    second = stats.factorial_moments[1]
    tau = second if tau is None else float(tau)
    gap = abs(stats.mean - stats.probability_at_least(1))
    # E k - P{k >= 1} = E (k-1)_+ is bounded by E k(k-1) / 2 sample by sample
    stderr = 0.5 * stats.factorial_stderr[1]
    holds = True if second > tau else gap <= tau + sigmas * stderr
    return MinamiGapCheck(tau, gap, stderr, holds)


def stieltjes_task(config: EnsembleConfig, E0: float, z: complex, index: int) -> float:
    eigenvalues = eigenvalues_banded(sample_band_matrix(config, index)).eigenvalues
    scaled = (2 * config.half_size + 1) * (eigenvalues - E0)
    return float(np.sum((1.0 / (scaled - z)).imag))


def stieltjes_intensity(
    config: EnsembleConfig, E0: float, sample_count: int, z: complex = 1j, mapper: Mapper = serial_map
) -> Tuple[float, float]:
    """
    ``E xi(phi_z) / pi`` with ``phi_z(u) = Im 1/(u - z)``; tends to the DOS at ``E0`` as ``N`` grows.

    :return: ``(estimate, stderr)``.
    """
    if not complex(z).imag > 0:
        raise InvalidConfigError("z must lie in the upper half plane")
    values = np.asarray(mapper(partial(stieltjes_task, config, E0, complex(z)), sample_count)) / math.pi
    return jackknife_mean(values)
