"""
Semicircle law ``(1/2pi) sqrt(4 - E^2)_+`` and its moments.
"""

import math

import numpy as np
from scipy import integrate


def semicircle_density(E):
    E = np.asarray(E, dtype=float)
    value = np.sqrt(np.maximum(4.0 - E * E, 0.0)) / (2.0 * math.pi)
    return float(value) if value.ndim == 0 else value


def semicircle_cdf(E):
    """
    Closed-form distribution function, used for bin averages of the density.
    """
    x = np.clip(np.asarray(E, dtype=float), -2.0, 2.0)
    value = 0.5 + (x * np.sqrt(4.0 - x * x) / 4.0 + np.arcsin(x / 2.0)) / math.pi
    return float(value) if value.ndim == 0 else value


def semicircle_moment(p: int) -> float:
    """
    ``int E^p dnu_SCL`` by adaptive quadrature with the square-root endpoint weight.
    """
    if p < 0:
        raise ValueError("moment order must be >= 0")
    # (E + 2)^{1/2} (2 - E)^{1/2} is exactly the 'alg' weight with alpha = beta = 1/2
    value, _ = integrate.quad(lambda E: E**p / (2.0 * math.pi), -2.0, 2.0, weight="alg", wvar=(0.5, 0.5), epsabs=1e-13, epsrel=1e-12)
    return value
