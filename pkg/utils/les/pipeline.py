"""
.. module:: pipeline
   :platform: Python
   :synopsis: Mean counts and Poisson distances along a ladder of system sizes.

The intensity comes from the resolvent density-of-states estimator at the largest size with eps
extrapolation, never from the counts being tested.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import polars as pl

from utils.dos.estimators import DEFAULT_EPS_LADDER, dos_resolvent
from utils.ensemble.band_matrix import EnsembleConfig
from utils.errors import InvalidIntensityError
from utils.les.gof import GofReport, poisson_gof
from utils.les.point_process import CountStatistics, Window, count_statistics, sample_realizations
from utils.mapping import Mapper, serial_map
from utils.statistics import jackknife_mean

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineRow:
    N: int
    mean_count: float
    mean_stderr: float
    expected_count: float
    gof: GofReport


@dataclass(frozen=True)
class IntensityPipelineReport:
    E0: float
    window: Window
    intensity: float
    intensity_stderr: float
    rows: Tuple[PipelineRow, ...]
    statistics: Tuple[CountStatistics, ...] = field(default=(), repr=False)

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "N": [r.N for r in self.rows],
                "mean_count": [r.mean_count for r in self.rows],
                "mean_stderr": [r.mean_stderr for r in self.rows],
                "expected_count": [r.expected_count for r in self.rows],
                "tv_distance": [r.gof.tv_distance for r in self.rows],
                "ks_distance": [r.gof.ks_distance for r in self.rows],
                "chi2_pvalue": [r.gof.chi2_pvalue for r in self.rows],
            }
        )


def estimate_intensity(
    config: EnsembleConfig,
    E0: float,
    sample_count: int,
    eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER,
    mapper: Mapper = serial_map,
) -> Tuple[float, float]:
    """
    ``(1/pi) E Im G_00(E0 + i eps)`` extrapolated over ``eps_ladder``.
    """
    estimate = dos_resolvent(config, [E0], eps_ladder, sample_count, variant="center", mapper=mapper)
    value, stderr = float(estimate.values[0]), float(estimate.stderr[0])
    if not value > 0:
        raise InvalidIntensityError(f"estimated density of states at E0={E0} is {value}; no Poisson reference")
    return value, stderr


def intensity_pipeline(
    config: EnsembleConfig,
    N_values: Sequence[int],
    E0: float,
    window: Optional[Window] = None,
    sample_count: int = 1000,
    intensity_samples: int = 1000,
    eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER,
    intensity: Optional[float] = None,
    mapper: Mapper = serial_map,
) -> IntensityPipelineReport:
    """
    Window-count means and Poisson goodness of fit for each ``N`` in ``N_values``.

    :param config: Ensemble; its ``half_size`` is replaced by each ladder value.
    :param N_values: Increasing half sizes.
    :param E0: Reference energy.
    :param window: Rescaled window; by default centred at 0 with ``|A| = 1/n`` so ``lambda = 1``.
    :param sample_count: Realizations per size.
    :param intensity_samples: Samples for the intensity estimate at the largest size.
    :param eps_ladder: Extrapolation ladder for the intensity.
    :param intensity: Known intensity, skipping the estimate.
    :param mapper: Per-sample mapper.
    """
    sizes = sorted(int(n) for n in N_values)
    if intensity is None:
        intensity, intensity_stderr = estimate_intensity(config.with_half_size(sizes[-1]), E0, intensity_samples, eps_ladder, mapper)
    else:
        intensity_stderr = 0.0
    logger.info("Intensity at E0=%.3f: %.5f +/- %.2g", E0, intensity, intensity_stderr)
    if window is None:
        window = Window.centered(0.0, 1.0 / intensity)

    rows, collected = [], []
    for n in sizes:
        realizations = sample_realizations(config.with_half_size(n), E0, window, sample_count, mapper)
        stats = count_statistics(realizations)
        _, mean_stderr = jackknife_mean([r.count for r in realizations])
        gof = poisson_gof(stats, intensity)
        rows.append(PipelineRow(n, stats.mean, mean_stderr, intensity * window.length, gof))
        collected.append(stats)
        logger.info("N=%d: mean count %.4f (expected %.4f), TV %.4f", n, stats.mean, intensity * window.length, gof.tv_distance)
    return IntensityPipelineReport(E0, window, intensity, intensity_stderr, tuple(rows), tuple(collected))
