"""
.. module:: gof
   :platform: Python
   :synopsis: Poisson goodness of fit for window counts and within-window gaps.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import stats

from utils.errors import InvalidIntensityError
from utils.les.point_process import CountStatistics

logger = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-6
MIN_EXPECTED = 5.0


@dataclass(frozen=True)
class GofReport:
    """
    Fit of window counts to ``Poisson(lambda)`` with ``lambda = n |A|``.

    ``ks_distance`` compares pooled within-window gaps with the gap law of a rate-``n`` Poisson
    process seen through a window of length ``|A|``; it is ``None`` without gaps.
    """

    intensity: float
    expected_count: float
    tv_distance: float
    k_max: int
    chi2_pvalue: float
    chi2_bins: int
    ks_distance: Optional[float]
    ks_pvalue: Optional[float]
    gap_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def poisson_k_max(lam: float, tolerance: float = TAIL_TOLERANCE) -> int:
    """
    Smallest ``k`` with ``P{Poisson(lam) > k} < tolerance``.
    """
    k = int(max(0, math.floor(lam)))
    while stats.poisson.sf(k, lam) >= tolerance:
        k += 1
    return k


def tv_distance(histogram: dict, total: int, lam: float) -> tuple:
    """
    Total variation between the empirical count law and ``Poisson(lam)``, truncated at ``k_max`` with the
    remaining mass of both laws lumped into one cell.
    """
    k_max = poisson_k_max(lam)
    k = np.arange(k_max + 1)
    empirical = np.array([histogram.get(int(i), 0) for i in k], dtype=float) / total
    reference = stats.poisson.pmf(k, lam)
    tail_empirical = 1.0 - empirical.sum()
    tail_reference = float(stats.poisson.sf(k_max, lam))
    distance = 0.5 * (np.abs(empirical - reference).sum() + abs(tail_empirical - tail_reference))
    return float(min(max(distance, 0.0), 1.0)), k_max


def _pooled_chi_square(histogram: dict, total: int, lam: float):
    k_max = poisson_k_max(lam)
    observed = [float(histogram.get(k, 0)) for k in range(k_max + 1)]
    observed.append(float(total - sum(observed)))
    expected = list(total * stats.poisson.pmf(np.arange(k_max + 1), lam))
    expected.append(total * float(stats.poisson.sf(k_max, lam)))
    # merge from the right until every cell expects at least MIN_EXPECTED
    obs_cells, exp_cells = [], []
    acc_obs = acc_exp = 0.0
    for o, e in zip(reversed(observed), reversed(expected)):
        acc_obs += o
        acc_exp += e
        if acc_exp >= MIN_EXPECTED:
            obs_cells.append(acc_obs)
            exp_cells.append(acc_exp)
            acc_obs = acc_exp = 0.0
    if acc_exp > 0 or acc_obs > 0:
        if exp_cells:
            obs_cells[-1] += acc_obs
            exp_cells[-1] += acc_exp
        else:
            obs_cells.append(acc_obs)
            exp_cells.append(acc_exp)
    if len(obs_cells) < 2:
        return math.nan, len(obs_cells)
    observed_arr = np.array(obs_cells[::-1])
    expected_arr = np.array(exp_cells[::-1])
    expected_arr *= observed_arr.sum() / expected_arr.sum()
    return float(stats.chisquare(observed_arr, expected_arr).pvalue), len(obs_cells)


def window_gap_cdf(g, rate: float, length: float):
    """
    CDF of pooled consecutive gaps of a rate-``rate`` Poisson process inside a window of ``length``;
    the density is proportional to ``(length - g) exp(-rate g)`` on ``[0, length]``.
    """
    g = np.clip(np.asarray(g, dtype=float), 0.0, length)

    def primitive(x):
        decay = -np.expm1(-rate * x)
        # int_0^x (length - t) e^{-rate t} dt
        return length * decay / rate - (decay - rate * x * np.exp(-rate * x)) / rate**2

    return primitive(g) / primitive(length)


def poisson_gof(count_stats: CountStatistics, intensity: float) -> GofReport:
    """
    Compare window counts with ``Poisson(n |A|)`` and within-window gaps with the rate-``n`` gap law.

    :param count_stats: Count statistics in window ``A``.
    :param intensity: Density of states ``n > 0`` at ``E0``, estimated independently of the counts.
    :raises InvalidIntensityError: If ``intensity <= 0``.
    """
    if not intensity > 0:
        raise InvalidIntensityError(f"Poisson intensity must be > 0, got {intensity}")
    lam = intensity * count_stats.window.length
    total = count_stats.realization_count
    tv, k_max = tv_distance(count_stats.histogram, total, lam)
    pvalue, bins = _pooled_chi_square(count_stats.histogram, total, lam)

    ks_distance = ks_pvalue = None
    gaps = count_stats.gaps
    if gaps.size:
        length = count_stats.window.length
        result = stats.kstest(gaps, lambda g: window_gap_cdf(g, intensity, length))
        ks_distance, ks_pvalue = float(result.statistic), float(result.pvalue)

    report = GofReport(intensity, lam, tv, k_max, pvalue, bins, ks_distance, ks_pvalue, int(gaps.size))
    logger.info("Poisson GOF lambda=%.4f: TV=%.4f chi2 p=%.3g KS=%s over %d realizations", lam, tv, pvalue, ks_distance, total)
    return report
