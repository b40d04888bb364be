"""
.. module:: eigen
   :platform: Python
   :synopsis: Banded symmetric eigensolver.

The band is handed to LAPACK's banded symmetric driver (``scipy.linalg.eig_banded``), which
reduces to tridiagonal form by orthogonal similarity and then runs the tridiagonal QL/QR
iteration. Dense solvers are only used as oracles in the tests.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from utils.ensemble.band_matrix import BandMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralDecomposition:
    """
    Ascending eigenvalues of one matrix and, optionally, orthonormal eigenvectors as columns.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None

    @property
    def order(self) -> int:
        return int(self.eigenvalues.shape[0])


def eigenvalues_banded(H: BandMatrix, want_vectors: bool = False) -> SpectralDecomposition:
    """
    All ``order`` eigenvalues of ``H``.

    :param H: Symmetric band matrix.
    :type H: BandMatrix
    :param want_vectors: Also return eigenvectors.
    :type want_vectors: bool
    :return: Eigenvalues in ascending order.
    :rtype: SpectralDecomposition
    """
    if H.half_bandwidth == 0 or H.order == 1:
        diagonal = H.band[0]
        order = np.argsort(diagonal, kind="stable")
        vectors = np.eye(H.order)[:, order] if want_vectors else None
        return SpectralDecomposition(diagonal[order].copy(), vectors)

    rows = min(H.half_bandwidth, H.order - 1) + 1
    band = np.ascontiguousarray(H.band[:rows])
    if want_vectors:
        values, vectors = linalg.eig_banded(band, lower=True, check_finite=False)
        return SpectralDecomposition(values, vectors)
    values = linalg.eig_banded(band, lower=True, eigvals_only=True, check_finite=False)
    return SpectralDecomposition(np.sort(values))
