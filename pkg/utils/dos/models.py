from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import polars as pl

DosMethod = Literal["histogram", "kde", "resolvent"]


@dataclass(frozen=True)
class DosEstimate:
    """
    Density of states on an ascending energy grid.

    ``smoothing`` is the bin width, the kernel bandwidth or ``eps`` depending on ``method``.
    ``metadata`` carries estimator details such as the eps ladder, retried samples or tail mass.
    """

    energy_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    method: DosMethod
    smoothing: float
    sample_count: int
    metadata: dict = field(default_factory=dict)

    def to_frame(self) -> pl.DataFrame:
        n = len(self.energy_grid)
        return pl.DataFrame(
            {
                "E": np.asarray(self.energy_grid, dtype=float),
                "value": np.asarray(self.values, dtype=float),
                "stderr": np.asarray(self.stderr, dtype=float),
                "method": [self.method] * n,
                "smoothing": [float(self.smoothing)] * n,
                "samples": [int(self.sample_count)] * n,
            }
        )

    def integral(self) -> float:
        """
        Mass on the grid; bin widths for histograms, trapezoid rule otherwise.
        """
        if self.method == "histogram" and "edges" in self.metadata:
            return float(np.sum(self.values * np.diff(self.metadata["edges"])))
        grid = np.asarray(self.energy_grid)
        mid = 0.5 * (self.values[1:] + self.values[:-1])
        return float(np.sum(mid * np.diff(grid)))

    def value_at(self, E: float) -> float:
        return float(np.interp(E, self.energy_grid, self.values))

    def stderr_at(self, E: float) -> float:
        return float(np.interp(E, self.energy_grid, self.stderr))


@dataclass(frozen=True)
class MomentEstimate:
    p: int
    value: float
    stderr: float
    N: int
    L: Optional[int]
    interior: bool = False


@dataclass(frozen=True)
class ConvergenceGap:
    gap: float
    stderr: float
    at_energy: float
    N: int
    N_prime: int


@dataclass(frozen=True)
class SmoothnessProbe:
    order: int
    energy_grid: np.ndarray
    derivative: np.ndarray
    stderr: np.ndarray
    noise_dominated: bool


@dataclass(frozen=True)
class StabilityReport:
    max_z: float
    stable: bool
    compared_points: int


def moments_frame(moments) -> pl.DataFrame:
    return pl.DataFrame(
        {
            "p": [m.p for m in moments],
            "value": [m.value for m in moments],
            "stderr": [m.stderr for m in moments],
            "N": [m.N for m in moments],
            "L": [m.L for m in moments],
            "interior": [m.interior for m in moments],
        }
    )
