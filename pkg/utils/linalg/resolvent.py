"""
.. module:: resolvent
   :platform: Python
   :synopsis: Green's-function entries from complex banded LU solves.

Module `resolvent` factors ``H - z`` once with LAPACK ``zgbtrf`` (partial pivoting inside the band,
fill widened to ``2L`` superdiagonals) and solves for unit right-hand sides with ``zgbtrs``.
A pivot below ``1e-13 * ||H||`` raises :class:`NearSingularError`; callers retry with a larger
imaginary part.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from utils.ensemble.band_matrix import BandMatrix
from utils.errors import InvalidConfigError, NearSingularError

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-13


@dataclass(frozen=True)
class ComplexShift:
    """
    ``z = E + i eps`` with ``eps >= 0``.
    """

    E: float
    eps: float = 0.0

    def __post_init__(self):
        if not self.eps >= 0:
            raise InvalidConfigError(f"eps must be >= 0, got {self.eps}")

    @property
    def z(self) -> complex:
        return complex(self.E, self.eps)

    def widened(self, factor: float = 2.0) -> "ComplexShift":
        return ComplexShift(self.E, self.eps * factor)

    def with_eps(self, eps: float) -> "ComplexShift":
        return ComplexShift(self.E, eps)


@dataclass(frozen=True)
class GreenEntry:
    j: int
    k: int
    z: ComplexShift
    value: complex


class BandedResolvent:
    """
    LU factorization of ``H - z`` reused for several columns of ``(H - z)^{-1}``.

    :Example:

    .. code-block:: python

        resolvent = BandedResolvent(H, ComplexShift(0.3, 0.1))
        g_00 = resolvent.entry(0, 0)
        column = resolvent.column(0)
    """

    def __init__(self, H: BandMatrix, shift: ComplexShift):
        """
        :param H: Symmetric band matrix.
        :param shift: Spectral parameter.
        :raises NearSingularError: If a pivot falls below ``1e-13 * ||H||``.
        """
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self.H = H
        self.shift = shift
        z = shift.z
        n = H.order
        bw = min(H.half_bandwidth, n - 1)
        self.bandwidth = bw
        threshold = PIVOT_TOLERANCE * H.norm_bound()

        if bw == 0:
            self._diagonal = H.band[0].astype(complex) - z
            smallest = float(np.min(np.abs(self._diagonal)))
            if smallest <= threshold:
                raise NearSingularError(f"pivot {smallest:.3e} below {threshold:.3e} at z={z}; add a positive imaginary part")
            return

        ab = np.zeros((3 * bw + 1, n), dtype=complex)
        for d in range(bw + 1):
            values = H.band[d, : n - d]
            ab[2 * bw + d, : n - d] = values
            if d:
                ab[2 * bw - d, d:] = values
        ab[2 * bw, :] -= z
        lu, ipiv, info = lapack.zgbtrf(ab, bw, bw)
        pivots = np.abs(lu[2 * bw, :])
        smallest = float(pivots.min())
        if info > 0 or smallest <= threshold:
            raise NearSingularError(f"pivot {smallest:.3e} below {threshold:.3e} at z={z}; add a positive imaginary part")
        if info < 0:
            raise ValueError(f"zgbtrf rejected argument {-info}")
        self._lu = lu
        self._ipiv = ipiv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """
        Solve ``(H - z) x = rhs`` for one or several right-hand-side columns.
        """
        rhs = np.asarray(rhs, dtype=complex)
        if self.bandwidth == 0:
            return rhs / (self._diagonal if rhs.ndim == 1 else self._diagonal[:, None])
        x, info = lapack.zgbtrs(self._lu, self.bandwidth, self.bandwidth, rhs, self._ipiv)
        if info != 0:
            raise ValueError(f"zgbtrs rejected argument {-info}")
        return x

    def column(self, k: int) -> np.ndarray:
        """
        Column ``k`` of ``(H - z)^{-1}``, indexed by storage position.
        """
        rhs = np.zeros(self.H.order, dtype=complex)
        rhs[self.H.position(k)] = 1.0
        return self.solve(rhs)

    def entry(self, j: int, k: int) -> complex:
        return complex(self.column(k)[self.H.position(j)])


def green_entry(H: BandMatrix, z: ComplexShift, j: int, k: int) -> complex:
    """
    ``<e_j, (H - z)^{-1} e_k>`` for matrix indices ``j, k``.

    :raises NearSingularError: When ``z`` sits (numerically) on the spectrum.
    """
    return BandedResolvent(H, z).entry(j, k)


def green_column(H: BandMatrix, z: ComplexShift, k: int) -> np.ndarray:
    return BandedResolvent(H, z).column(k)


def resolvent_trace(eigenvalues: np.ndarray, z: complex) -> complex:
    """
    ``Tr (H - z)^{-1} = sum_k 1 / (lambda_k - z)`` from a spectrum.
    """
    return complex(np.sum(1.0 / (np.asarray(eigenvalues) - z)))


def reduced_matrix(H: BandMatrix, j: int) -> BandMatrix:
    """
    ``H`` with row and column ``j`` set to zero; every other entry is unchanged.
    """
    p = H.position(j)
    band = H.band.copy()
    for d in range(H.half_bandwidth + 1):
        band[d, p] = 0.0
        if d and p - d >= 0:
            band[d, p - d] = 0.0
    return H.with_band(band)
