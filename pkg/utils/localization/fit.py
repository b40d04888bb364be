import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from utils.errors import InsufficientDecayRangeError
from utils.localization.fractional import FracMomentProfile
from utils.statistics import weighted_linear_fit

logger = logging.getLogger(__name__)

MIN_USABLE_ROWS = 4
SIGNAL_TO_NOISE = 3.0


@dataclass(frozen=True)
class DecayFit:
    """
    ``E|G|^s ~ exp(log_C - alpha d)`` fitted on the usable distances.
    """

    log_C: float
    alpha: float
    alpha_ci: Tuple[float, float]
    r_squared: float
    distances_used: Tuple[int, ...]
    residuals: Tuple[float, ...]

    def predict(self, distance) -> np.ndarray:
        return np.exp(self.log_C - self.alpha * np.asarray(distance, dtype=float))

    @property
    def decay_detected(self) -> bool:
        return self.alpha_ci[0] > 0


def decay_fit(profile: FracMomentProfile, min_distance: int = 1) -> DecayFit:
    """
    Weighted least squares of ``log(estimate)`` against distance.

    Rows count as usable when ``d >= min_distance`` and ``estimate > 3 * stderr``. Weights use the
    delta-method error ``stderr / estimate`` of the logarithm.

    :param profile: Fractional-moment profile.
    :param min_distance: Smallest distance to include.
    :return: Fitted rate with a 95% interval.
    :raises InsufficientDecayRangeError: With fewer than four usable rows.
    """
    usable = [r for r in profile.rows if r.distance >= min_distance and r.estimate > SIGNAL_TO_NOISE * r.stderr and r.estimate > 0]
    if len(usable) < MIN_USABLE_ROWS:
        raise InsufficientDecayRangeError(
            f"only {len(usable)} usable distances (need {MIN_USABLE_ROWS}) with estimate > {SIGNAL_TO_NOISE:g} stderr"
        )
    distances = np.array([r.distance for r in usable], dtype=float)
    estimates = np.array([r.estimate for r in usable])
    sigma = np.array([r.stderr for r in usable]) / estimates
    # rows with zero error (exact inputs) get the smallest nonzero error
    floor = float(sigma[sigma > 0].min()) if np.any(sigma > 0) else 1.0
    sigma = np.where(sigma > 0, sigma, floor)
    line = weighted_linear_fit(distances, np.log(estimates), sigma)
    fit = DecayFit(
        log_C=line.intercept,
        alpha=-line.slope,
        alpha_ci=(-line.slope_ci[1], -line.slope_ci[0]),
        r_squared=line.r_squared,
        distances_used=tuple(int(d) for d in distances),
        residuals=tuple(float(r) for r in line.residuals),
    )
    logger.info("Decay fit: alpha=%.4f CI=(%.4f, %.4f) R2=%.3f on %d rows", fit.alpha, *fit.alpha_ci, fit.r_squared, len(usable))
    return fit
