"""
.. module:: band_matrix
   :platform: Python
   :synopsis: Symmetric random band matrices in lower band storage.

Module `band_matrix` samples the ensemble ``H = (v_ij / sqrt(2L+1))`` on indices ``[-N, N]``.
Only the diagonal and the ``L`` subdiagonals are stored. Entries are keyed by matrix position,
so the matrix of half size ``M`` is exactly the principal restriction of the one of half size
``N > M`` built from the same seed and sample index.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import sparse

from utils.ensemble.density import DensitySpec, density_sample_many
from utils.ensemble.rng import RngStream
from utils.errors import InvalidConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleConfig:
    """
    Fixed parameters of one ensemble.

    :param half_size: ``N``; the matrix order is ``2N+1``.
    :param bandwidth_half: ``L`` with ``0 <= L <= 2N``.
    :param density: Law of the raw entries.
    :param master_seed: 64-bit master seed.
    """

    half_size: int
    bandwidth_half: int
    density: DensitySpec = field(default_factory=DensitySpec)
    master_seed: int = 0

    def __post_init__(self):
        if self.half_size < 0:
            raise InvalidConfigError(f"N must be >= 0, got {self.half_size}")
        if not 0 <= self.bandwidth_half <= 2 * self.half_size:
            raise InvalidConfigError(f"L must satisfy 0 <= L <= 2N, got L={self.bandwidth_half}, N={self.half_size}")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidConfigError(f"seed must be an unsigned 64-bit integer, got {self.master_seed}")

    @property
    def order(self) -> int:
        return 2 * self.half_size + 1

    def with_half_size(self, half_size: int) -> "EnsembleConfig":
        return replace(self, half_size=half_size)

    def to_dict(self) -> dict:
        return {"N": self.half_size, "L": self.bandwidth_half, "seed": self.master_seed, "density": self.density.to_dict()}

    @classmethod
    def from_dict(cls, block: dict) -> "EnsembleConfig":
        unknown = set(block) - {"N", "L", "seed", "density"}
        if unknown:
            raise InvalidConfigError(f"unknown ensemble keys: {', '.join(sorted(unknown))}")
        return cls(
            half_size=int(block.get("N", 0)),
            bandwidth_half=int(block.get("L", 0)),
            density=DensitySpec.from_dict(block.get("density", {})),
            master_seed=int(block.get("seed", 0)),
        )


class BandMatrix:
    """
    Real symmetric band matrix in lower band storage.

    ``band[d, c - index_min] = H[c + d, c]`` for ``0 <= d <= L``; slots with ``c + d`` past the last
    index are zero padding. Indices run over ``index_min .. index_min + order - 1``.
    """

    def __init__(self, band: np.ndarray, index_min: Optional[int] = None):
        band = np.array(band, dtype=float, ndmin=2)
        order = band.shape[1]
        for d in range(1, band.shape[0]):
            band[d, max(order - d, 0):] = 0.0
        band.flags.writeable = False
        self.band = band
        self.order = order
        self.half_bandwidth = band.shape[0] - 1
        self.index_min = -((order - 1) // 2) if index_min is None else int(index_min)

    @classmethod
    def from_dense(cls, dense, half_bandwidth: int, index_min: Optional[int] = None) -> "BandMatrix":
        """
        Lower band of a dense symmetric array; entries beyond ``half_bandwidth`` are ignored.
        """
        dense = np.asarray(dense, dtype=float)
        n = dense.shape[0]
        band = np.zeros((half_bandwidth + 1, n))
        for d in range(half_bandwidth + 1):
            band[d, : n - d] = np.diagonal(dense, offset=-d)
        return cls(band, index_min)

    @property
    def half_size(self) -> int:
        return (self.order - 1) // 2

    @property
    def index_max(self) -> int:
        return self.index_min + self.order - 1

    def position(self, j: int) -> int:
        """
        Storage column of matrix index ``j``.
        """
        if not self.index_min <= j <= self.index_max:
            raise InvalidConfigError(f"index {j} outside [{self.index_min}, {self.index_max}]")
        return j - self.index_min

    def entry(self, i: int, j: int) -> float:
        pi, pj = self.position(i), self.position(j)
        lo, d = min(pi, pj), abs(pi - pj)
        return float(self.band[d, lo]) if d <= self.half_bandwidth else 0.0

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.order, self.order))
        idx = np.arange(self.order)
        for d in range(self.half_bandwidth + 1):
            cols = idx[: self.order - d]
            dense[cols + d, cols] = self.band[d, : self.order - d]
            dense[cols, cols + d] = self.band[d, : self.order - d]
        return dense

    def to_sparse(self) -> sparse.csr_matrix:
        diagonals, offsets = [], []
        for d in range(min(self.half_bandwidth, self.order - 1) + 1):
            values = self.band[d, : self.order - d]
            diagonals.append(values)
            offsets.append(-d)
            if d:
                diagonals.append(values)
                offsets.append(d)
        return sparse.diags(diagonals, offsets, shape=(self.order, self.order), format="csr")

    def norm_bound(self) -> float:
        """
        Max absolute row sum, an upper bound on the spectral norm.
        """
        rows = np.zeros(self.order)
        for d in range(min(self.half_bandwidth, self.order - 1) + 1):
            values = np.abs(self.band[d, : self.order - d])
            rows[d:] += values
            if d:
                rows[: self.order - d] += values
        return float(rows.max()) if self.order else 0.0

    def principal_submatrix(self, lo: int, hi: int) -> "BandMatrix":
        """
        Restriction to matrix indices ``lo..hi`` (inclusive), keeping their labels.
        """
        a, b = self.position(lo), self.position(hi)
        if b < a:
            raise InvalidConfigError(f"empty index range [{lo}, {hi}]")
        return BandMatrix(self.band[:, a : b + 1].copy(), index_min=lo)

    def with_band(self, band: np.ndarray) -> "BandMatrix":
        return BandMatrix(band, index_min=self.index_min)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BandMatrix):
            return NotImplemented
        return self.index_min == other.index_min and np.array_equal(self.band, other.band)

    def __repr__(self) -> str:
        return f"BandMatrix(order={self.order}, half_bandwidth={self.half_bandwidth}, index_min={self.index_min})"


def sample_band_matrix(config: EnsembleConfig, sample_index: int, scale_entries: bool = True) -> BandMatrix:
    """
    Draw sample ``sample_index`` of the ensemble.

    Diagonal ``d`` is drawn from two streams keyed ``(d, 0)`` and ``(d, 1)``: the first yields
    ``H[c+d, c]`` for ``c = 0, 1, 2, ...`` and the second for ``c = -1, -2, ...``, so the value at a
    position never depends on ``N``.

    :param config: Ensemble parameters.
    :type config: EnsembleConfig
    :param sample_index: Monte Carlo sample index, ``>= 0``.
    :type sample_index: int
    :param scale_entries: Divide raw draws by ``sqrt(2L+1)``; off only to re-derive raw draws.
    :type scale_entries: bool
    :return: The sampled matrix on indices ``[-N, N]``.
    :rtype: BandMatrix
    :raises InvalidConfigError: For a negative sample index.
    """
    if sample_index < 0:
        raise InvalidConfigError(f"sample_index must be >= 0, got {sample_index}")
    n, big_l = config.half_size, config.bandwidth_half
    order = config.order
    band = np.zeros((big_l + 1, order))
    for d in range(big_l + 1):
        # columns c = 0 .. N-d
        forward = max(n - d + 1, 0)
        if forward:
            band[d, n : n + forward] = density_sample_many(
                config.density, RngStream(config.master_seed, sample_index, (d, 0)), forward
            )
        # columns c = -1 .. -N; c = -k is valid while -k + d <= N
        if n:
            backward = density_sample_many(config.density, RngStream(config.master_seed, sample_index, (d, 1)), n)
            k = np.arange(1, n + 1)
            valid = k >= d - n
            band[d, n - k[valid]] = backward[valid]
    if scale_entries:
        band /= math.sqrt(2 * big_l + 1)
    return BandMatrix(band, index_min=-n)
