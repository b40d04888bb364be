"""
.. module:: volume
   :platform: Python
   :synopsis: Finite-volume differences of diagonal Green's functions and reduced-matrix resolvent decay.

All finite-volume comparisons use coupled matrices: ``H^M`` is the principal restriction of
``H^N`` to ``[-M, M]`` taken from the same sample, so the two share every entry they have in common.
"""

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import polars as pl

from utils.ensemble.band_matrix import BandMatrix, EnsembleConfig, sample_band_matrix
from utils.errors import InvalidConfigError
from utils.linalg.resolvent import ComplexShift, reduced_matrix
from utils.localization.fractional import FractionalMoment, as_shift, factor_with_escalation
from utils.mapping import Mapper, serial_map
from utils.statistics import LinearFit, jackknife_mean, weighted_linear_fit

logger = logging.getLogger(__name__)

VOLUME_S_LIMIT = 1.0 / 9.0
REDUCED_S_LIMIT = 1.0 / 3.0


@dataclass(frozen=True)
class VolumeDifferenceRow:
    M: int
    green_difference: float
    green_stderr: float
    psi_difference: float
    psi_stderr: float


@dataclass(frozen=True)
class VolumeDifferenceReport:
    """
    Per-``M`` estimates of ``E|G^N_jj - G^M_jj|`` and ``E|<Psi_j, (R~_N - R~_M) Psi_j>|^s``.

    ``fit`` is the weighted log-linear fit of the Green's-function difference in ``M`` over rows
    whose estimate exceeds three standard errors, or ``None`` when fewer than three remain.
    """

    N: int
    L: int
    j: int
    z: ComplexShift
    s: float
    rows: Tuple[VolumeDifferenceRow, ...]
    fit: Optional[LinearFit] = None
    metadata: dict = field(default_factory=dict)

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "M": [r.M for r in self.rows],
                "green_difference": [r.green_difference for r in self.rows],
                "green_stderr": [r.green_stderr for r in self.rows],
                "psi_difference": [r.psi_difference for r in self.rows],
                "psi_stderr": [r.psi_stderr for r in self.rows],
            }
        )


def _psi(H: BandMatrix, j: int) -> np.ndarray:
    """
    Column ``j`` of ``H`` with the ``jj`` entry removed.
    """
    p = H.position(j)
    column = np.zeros(H.order)
    for d in range(1, H.half_bandwidth + 1):
        if p + d < H.order:
            column[p + d] = H.band[d, p]
        if p - d >= 0:
            column[p - d] = H.band[d, p - d]
    return column


def _boundary_coupling(H: BandMatrix, M: int, inner: np.ndarray, outer: np.ndarray) -> complex:
    """
    ``sum inner[a] H_ab outer[b]`` over ``|a| <= M < |b|``.

    ``inner`` is indexed by storage position of ``[-M, M]``, ``outer`` by storage position of ``H``.
    """
    total = 0j
    for d in range(1, H.half_bandwidth + 1):
        for a in range(max(M - d + 1, -M), M + 1):
            if a + d <= H.index_max:
                total += inner[a + M] * H.entry(a, a + d) * outer[H.position(a + d)]
        for a in range(-M, min(-M + d, M + 1)):
            if a - d >= H.index_min:
                total += inner[a + M] * H.entry(a, a - d) * outer[H.position(a - d)]
    return total


def _column_and_psi_solve(H: BandMatrix, j: int, shift: ComplexShift) -> Tuple[np.ndarray, np.ndarray, bool]:
    resolvent, escalated = factor_with_escalation(H, shift)
    reduced, escalated_reduced = factor_with_escalation(reduced_matrix(H, j), shift)
    return resolvent.column(j), reduced.solve(_psi(H, j)), escalated or escalated_reduced


def volume_difference_task(config: EnsembleConfig, M_values: Tuple[int, ...], j: int, shift: ComplexShift, s: float, index: int):
    # G^N - G^M = -G^M Gamma G^N with Gamma the couplings across |a| = M; no cancellation at large M
    H = sample_band_matrix(config, index)
    g_big, y_big, escalated = _column_and_psi_solve(H, j, shift)
    out = np.empty((len(M_values), 2))
    for a, M in enumerate(M_values):
        g_small, y_small, flag = _column_and_psi_solve(H.principal_submatrix(-M, M), j, shift)
        escalated = escalated or flag
        out[a, 0] = abs(_boundary_coupling(H, M, g_small, g_big))
        out[a, 1] = abs(_boundary_coupling(H, M, y_small, y_big)) ** s
    return out, escalated


def volume_difference_decay(
    config: EnsembleConfig,
    M_values: Sequence[int],
    j: int,
    z: Union[complex, ComplexShift],
    s_small: float,
    sample_count: int,
    mapper: Mapper = serial_map,
) -> VolumeDifferenceReport:
    """
    Coupled finite-volume differences at site ``j`` for every ``M`` in ``M_values``.

    :param config: Ensemble at the large size ``N = config.half_size``.
    :param M_values: Smaller half sizes with ``|j| <= M - L`` and ``M <= N``.
    :param j: Site.
    :param z: Spectral parameter.
    :param s_small: Exponent in ``(0, 1/9)``.
    :param sample_count: Number of coupled samples.
    :param mapper: Per-sample mapper.
    :raises InvalidConfigError: When ``|j| > M - L`` or ``M > N``.
    """
    if not 0.0 < s_small < VOLUME_S_LIMIT:
        raise InvalidConfigError(f"s_small must lie in (0, 1/9), got {s_small}")
    M_values = tuple(int(m) for m in M_values)
    big_l, n = config.bandwidth_half, config.half_size
    for M in M_values:
        if M > n:
            raise InvalidConfigError(f"M={M} exceeds N={n}")
        if abs(j) > M - big_l:
            raise InvalidConfigError(f"|j|={abs(j)} exceeds M - L = {M - big_l}")
    shift = as_shift(z)
    results = mapper(partial(volume_difference_task, config, M_values, j, shift, s_small), sample_count)
    stacked = np.stack([values for values, _ in results])
    escalated = [i for i, (_, flag) in enumerate(results) if flag]
    mean, stderr = jackknife_mean(stacked)
    rows = tuple(VolumeDifferenceRow(M, mean[a, 0], stderr[a, 0], mean[a, 1], stderr[a, 1]) for a, M in enumerate(M_values))

    usable = [r for r in rows if r.green_difference > 3.0 * r.green_stderr and r.green_difference > 0]
    fit = None
    if len(usable) >= 3:
        fit = weighted_linear_fit(
            [r.M for r in usable],
            np.log([r.green_difference for r in usable]),
            [r.green_stderr / r.green_difference for r in usable],
        )
    report = VolumeDifferenceReport(n, big_l, j, shift, s_small, rows, fit, {"escalated_samples": escalated})
    logger.info("Volume differences N=%d j=%d over M=%s: %s", n, j, M_values, [round(r.green_difference, 6) for r in rows])
    return report


def reduced_task(config: EnsembleConfig, j: int, i: int, k: int, shift: ComplexShift, s: float, index: int) -> Tuple[float, bool]:
    H = reduced_matrix(sample_band_matrix(config, index), j)
    resolvent, escalated = factor_with_escalation(H, shift)
    return abs(resolvent.entry(i, k)) ** s, escalated


def reduced_resolvent_decay(
    config: EnsembleConfig,
    j: int,
    i: int,
    k: int,
    z: Union[complex, ComplexShift],
    s: float,
    sample_count: int,
    mapper: Mapper = serial_map,
) -> FractionalMoment:
    """
    ``E |<e_i, (H~(j) - z)^{-1} e_k>|^s`` for a neighbour ``i`` of ``j`` and a boundary site ``k``.

    ``i = j`` is rejected: row ``j`` of the reduced resolvent is ``-e_j / z``, so the entry is ``0``
    for every ``k != j`` and carries no decay.

    :raises InvalidConfigError: Unless ``0 < |i - j| <= L``, ``||k| - N| <= L`` and ``s`` in ``(0, 1/3)``.
    """
    big_l, n = config.bandwidth_half, config.half_size
    if not 0.0 < s < REDUCED_S_LIMIT:
        raise InvalidConfigError(f"s must lie in (0, 1/3), got {s}")
    if i == j or abs(i - j) > big_l:
        raise InvalidConfigError(f"need 0 < |i - j| <= L, got i={i}, j={j}, L={big_l}")
    if abs(abs(k) - n) > big_l or abs(k) > n:
        raise InvalidConfigError(f"k={k} is not within L={big_l} of the boundary of [-{n}, {n}]")
    if abs(i) > n or abs(j) > n:
        raise InvalidConfigError(f"indices outside [-{n}, {n}]")
    shift = as_shift(z)
    results = mapper(partial(reduced_task, config, j, i, k, shift, s), sample_count)
    values = np.array([v for v, _ in results])
    escalated = tuple(a for a, (_, flag) in enumerate(results) if flag)
    estimate, stderr = jackknife_mean(values)
    logger.info("Reduced resolvent N=%d j=%d i=%d k=%d: %.4g +/- %.2g", n, j, i, k, estimate, stderr)
    return FractionalMoment(estimate, stderr, sample_count, escalated)
