"""
.. module:: statistics
   :platform: Python
   :synopsis: Monte Carlo reductions shared by the estimators.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import stats


def jackknife_mean(values) -> Tuple[float, float]:
    """
    Sample mean and its leave-one-out jackknife standard error.

    :param values: Per-sample values, first axis is the sample axis.
    :return: ``(mean, stderr)``; arrays when ``values`` has more than one axis.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    mean = values.mean(axis=0)
    if n < 2:
        return mean, np.full_like(mean, np.nan) if np.ndim(mean) else math.nan
    leave_one_out = (values.sum(axis=0) - values) / (n - 1)
    spread = ((leave_one_out - leave_one_out.mean(axis=0)) ** 2).sum(axis=0)
    stderr = np.sqrt((n - 1) / n * spread)
    if np.ndim(mean) == 0:
        return float(mean), float(stderr)
    return mean, stderr


def binomial_stderr(successes, trials: int):
    p = np.asarray(successes, dtype=float) / trials
    return np.sqrt(p * (1.0 - p) / trials)


def combined_stderr(*errors: float) -> float:
    return math.sqrt(sum(e * e for e in errors))


@dataclass(frozen=True)
class LinearFit:
    """
    Weighted least-squares line ``y = intercept + slope * x``.
    """

    intercept: float
    slope: float
    slope_ci: Tuple[float, float]
    r_squared: float
    residuals: np.ndarray
    points: int


def weighted_linear_fit(x, y, sigma=None, confidence: float = 0.95) -> LinearFit:
    """
    Fit a line with weights ``1/sigma^2``; the covariance is rescaled by the reduced chi-square and the
    slope interval uses Student's t with ``n - 2`` degrees of freedom.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 3:
        raise ValueError("need at least three points for a line with an interval")
    w = np.ones(n) if sigma is None else 1.0 / np.maximum(np.asarray(sigma, dtype=float), 1e-300) ** 2
    X = np.column_stack([np.ones(n), x])
    normal = X.T @ (w[:, None] * X)
    beta = np.linalg.solve(normal, X.T @ (w * y))
    residuals = y - X @ beta
    chi2 = float(np.sum(w * residuals**2))
    cov = np.linalg.inv(normal) * (chi2 / (n - 2))
    half = float(stats.t.ppf(0.5 + confidence / 2.0, n - 2)) * math.sqrt(max(cov[1, 1], 0.0))
    y_bar = float(np.sum(w * y) / np.sum(w))
    total = float(np.sum(w * (y - y_bar) ** 2))
    r_squared = 1.0 - chi2 / total if total > 0 else 0.0
    slope = float(beta[1])
    return LinearFit(float(beta[0]), slope, (slope - half, slope + half), r_squared, residuals, n)
