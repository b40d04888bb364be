"""
.. module:: fractional
   :platform: Python
   :synopsis: Fractional moments of Green's-function entries and their decay profiles.

Module `fractional` estimates ``E |G_jk(z)|^s`` for ``s`` in ``[0, 1)``. Real energies are allowed;
a near-singular solve at ``eps = 0`` is retried at ``eps = 1e-8`` and the sample is flagged.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import List, Sequence, Tuple, Union

import numpy as np
import polars as pl

from utils.ensemble.band_matrix import BandMatrix, EnsembleConfig, sample_band_matrix
from utils.errors import InvalidConfigError, NearSingularError
from utils.linalg.resolvent import BandedResolvent, ComplexShift
from utils.mapping import Mapper, serial_map
from utils.statistics import jackknife_mean

logger = logging.getLogger(__name__)

MIN_SAMPLES = 100
ESCALATED_EPS = 1e-8


def as_shift(z: Union[complex, ComplexShift]) -> ComplexShift:
    if isinstance(z, ComplexShift):
        return z
    z = complex(z)
    return ComplexShift(z.real, z.imag)


def factor_with_escalation(H: BandMatrix, shift: ComplexShift) -> Tuple[BandedResolvent, bool]:
    """
    Factor ``H - z``; on a near-singular pivot retry once at ``eps = max(1e-8, 2 eps)``.

    :return: ``(resolvent, escalated)``.
    """
    try:
        return BandedResolvent(H, shift), False
    except NearSingularError:
        return BandedResolvent(H, shift.with_eps(max(ESCALATED_EPS, 2.0 * shift.eps))), True


def high_energy_shift(bandwidth_half: int) -> float:
    """
    Heuristic start of the high-energy regime, ``|z| = 5 (2L+1)^{1/2}``.
    """
    return 5.0 * math.sqrt(2 * bandwidth_half + 1)


@dataclass(frozen=True)
class FractionalMoment:
    estimate: float
    stderr: float
    sample_count: int
    escalated: Tuple[int, ...] = ()


@dataclass(frozen=True)
class ProfileRow:
    distance: int
    estimate: float
    stderr: float
    sample_count: int


@dataclass(frozen=True)
class FracMomentProfile:
    """
    ``E |G_jk|^s`` against ``d = |j - k|`` around a center site.
    """

    s: float
    z: ComplexShift
    rows: Tuple[ProfileRow, ...]
    N: int
    L: int
    center: int = 0
    metadata: dict = field(default_factory=dict)

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "d": [r.distance for r in self.rows],
                "estimate": [r.estimate for r in self.rows],
                "stderr": [r.stderr for r in self.rows],
                "n_samples": [r.sample_count for r in self.rows],
            }
        )


def _check_s(s: float, upper: float = 1.0):
    if not 0.0 <= s < upper:
        raise InvalidConfigError(f"s must lie in [0, {upper:.4g}), got {s}")


def fractional_task(config: EnsembleConfig, shift: ComplexShift, s: float, j: int, k: int, index: int) -> Tuple[float, bool]:
    H = sample_band_matrix(config, index)
    resolvent, escalated = factor_with_escalation(H, shift)
    return abs(resolvent.entry(j, k)) ** s, escalated


def fractional_moment(
    config: EnsembleConfig,
    z: Union[complex, ComplexShift],
    s: float,
    j: int,
    k: int,
    sample_count: int,
    mapper: Mapper = serial_map,
) -> FractionalMoment:
    """
    Monte Carlo mean of ``|G_jk(z)|^s`` with jackknife standard error.

    :param config: Ensemble.
    :param z: Spectral parameter; real energies are allowed.
    :param s: Exponent in ``[0, 1)``; ``s = 0`` gives exactly 1.
    :param j: Row index in ``[-N, N]``.
    :param k: Column index in ``[-N, N]``.
    :param sample_count: At least 100.
    :param mapper: Per-sample mapper.
    """
    _check_s(s)
    if sample_count < MIN_SAMPLES:
        raise InvalidConfigError(f"fractional moments need at least {MIN_SAMPLES} samples, got {sample_count}")
    for index in (j, k):
        if abs(index) > config.half_size:
            raise InvalidConfigError(f"index {index} outside [-{config.half_size}, {config.half_size}]")
    shift = as_shift(z)
    results = mapper(partial(fractional_task, config, shift, s, j, k), sample_count)
    values = np.array([value for value, _ in results])
    escalated = tuple(i for i, (_, flag) in enumerate(results) if flag)
    if escalated:
        logger.warning("Fractional moment at z=%s: %d samples escalated to eps=%g", shift.z, len(escalated), ESCALATED_EPS)
    estimate, stderr = jackknife_mean(values)
    return FractionalMoment(estimate, stderr, sample_count, escalated)


def profile_task(config: EnsembleConfig, shift: ComplexShift, s: float, center: int, max_distance: int, index: int):
    H = sample_band_matrix(config, index)
    resolvent, escalated = factor_with_escalation(H, shift)
    column = np.abs(resolvent.column(center)) ** s
    p = H.position(center)
    values = np.empty(max_distance + 1)
    for d in range(max_distance + 1):
        sides = [column[q] for q in (p - d, p + d) if 0 <= q < H.order]
        values[d] = sum(sides) / len(sides)
    return values, escalated


def decay_profile(
    config: EnsembleConfig,
    z: Union[complex, ComplexShift],
    s: float,
    center: int,
    max_distance: int,
    sample_count: int,
    mapper: Mapper = serial_map,
) -> FracMomentProfile:
    """
    Profile of ``E |G_{center +- d, center}|^s`` for ``d = 0 .. max_distance``.

    One column solve per sample serves every distance, so all rows share the same samples. Where
    both ``center - d`` and ``center + d`` exist their values are averaged within the sample.
    """
    _check_s(s)
    n = config.half_size
    if abs(center) > n:
        raise InvalidConfigError(f"center {center} outside [-{n}, {n}]")
    if not 0 <= max_distance <= 2 * n or (center + max_distance > n and center - max_distance < -n):
        raise InvalidConfigError(f"max_distance {max_distance} leaves the matrix from center {center}")
    shift = as_shift(z)
    results = mapper(partial(profile_task, config, shift, s, center, max_distance), sample_count)
    values = np.stack([v for v, _ in results])
    escalated = [i for i, (_, flag) in enumerate(results) if flag]
    if escalated:
        logger.warning("Decay profile at z=%s: %d samples escalated", shift.z, len(escalated))
    mean, stderr = jackknife_mean(values)
    rows = tuple(ProfileRow(d, float(mean[d]), float(stderr[d]), sample_count) for d in range(max_distance + 1))
    logger.info("Decay profile N=%d L=%d z=%s s=%.3g: %d distances, %d samples", n, config.bandwidth_half, shift.z, s, len(rows), sample_count)
    return FracMomentProfile(s, shift, rows, n, config.bandwidth_half, center, {"escalated_samples": escalated})


@dataclass(frozen=True)
class SpectralAveragingPoint:
    z: ComplexShift
    diagonal: float
    diagonal_stderr: float
    off_diagonal: float
    off_diagonal_stderr: float
    imaginary: float
    imaginary_stderr: float


@dataclass(frozen=True)
class SpectralAveragingReport:
    points: Tuple[SpectralAveragingPoint, ...]
    bound: float

    @property
    def max_diagonal(self) -> float:
        return max(p.diagonal for p in self.points)

    @property
    def max_off_diagonal(self) -> float:
        return max(p.off_diagonal for p in self.points)

    @property
    def max_imaginary(self) -> float:
        return max(p.imaginary for p in self.points)

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "E": [p.z.E for p in self.points],
                "eps": [p.z.eps for p in self.points],
                "diag_moment": [p.diagonal for p in self.points],
                "diag_stderr": [p.diagonal_stderr for p in self.points],
                "offdiag_moment": [p.off_diagonal for p in self.points],
                "offdiag_stderr": [p.off_diagonal_stderr for p in self.points],
                "mean_abs_im": [p.imaginary for p in self.points],
                "mean_abs_im_stderr": [p.imaginary_stderr for p in self.points],
            }
        )


def spectral_averaging_bound(sup_norm: float, bandwidth_half: int) -> float:
    """
    ``pi ||rho||_inf (2L+1)^{1/2}``: the diagonal entry ``v_jj / sqrt(2L+1)`` has density at most
    ``(2L+1)^{1/2} ||rho||_inf``.
    """
    return math.pi * sup_norm * math.sqrt(2 * bandwidth_half + 1)


def averaging_task(config: EnsembleConfig, shifts: Tuple[ComplexShift, ...], s: float, j: int, index: int) -> np.ndarray:
    H = sample_band_matrix(config, index)
    k = j + 1 if j + 1 <= config.half_size else j - 1
    out = np.zeros((len(shifts), 3))
    for a, shift in enumerate(shifts):
        resolvent, _ = factor_with_escalation(H, shift)
        column = resolvent.column(j)
        g_jj = column[H.position(j)]
        out[a, 0] = abs(g_jj) ** s
        out[a, 1] = abs(column[H.position(k)]) ** s if H.order > 1 else 0.0
        out[a, 2] = abs(g_jj.imag)
    return out


def spectral_averaging_sup(
    config: EnsembleConfig,
    s: float,
    z_grid: Sequence[Union[complex, ComplexShift]],
    sample_count: int,
    j: int = 0,
    mapper: Mapper = serial_map,
) -> SpectralAveragingReport:
    """
    Suprema over ``z_grid`` of ``E|G_jj|^s``, ``E|G_{j,j+1}|^s`` and ``E|Im G_jj|``.

    :return: Per-point estimates with errors and the spectral-averaging bound on ``E|Im G_jj|``.
    """
    _check_s(s)
    if not z_grid:
        raise InvalidConfigError("z_grid is empty")
    shifts = tuple(as_shift(z) for z in z_grid)
    stacked = np.stack(mapper(partial(averaging_task, config, shifts, s, j), sample_count))
    mean, stderr = jackknife_mean(stacked)
    points = tuple(
        SpectralAveragingPoint(shift, mean[a, 0], stderr[a, 0], mean[a, 1], stderr[a, 1], mean[a, 2], stderr[a, 2])
        for a, shift in enumerate(shifts)
    )
    report = SpectralAveragingReport(points, spectral_averaging_bound(config.density.sup_norm, config.bandwidth_half))
    logger.info("Spectral averaging: max E|Im G_jj| = %.4f (bound %.4f)", report.max_imaginary, report.bound)
    return report


def profile_from_rows(s: float, z, rows: Sequence[Tuple[int, float, float, int]], N: int = 0, L: int = 0) -> FracMomentProfile:
    """
    Build a profile from ``(d, estimate, stderr, n_samples)`` tuples, e.g. read back from CSV.
    """
    return FracMomentProfile(s, as_shift(z), tuple(ProfileRow(int(d), float(e), float(se), int(n)) for d, e, se, n in rows), N, L)


def profiles_table(profiles: List[FracMomentProfile]) -> pl.DataFrame:
    frames = []
    for profile in profiles:
        frames.append(profile.to_frame().with_columns(pl.lit(profile.z.E).alias("E"), pl.lit(profile.z.eps).alias("eps")))
    return pl.concat(frames)
