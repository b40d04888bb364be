"""
.. module:: estimators
   :platform: Python
   :synopsis: Integrated density of states, density-of-states estimators, moments and convergence checks.

Module `estimators` holds the Monte Carlo estimators of the local density of states of the band
ensemble. Every estimator takes a ``mapper`` (see :mod:`utils.mapping`) for the per-sample work and
reduces the results in ascending sample order.
"""

import logging
import math
from functools import partial
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from utils.dos.models import ConvergenceGap, DosEstimate, MomentEstimate, SmoothnessProbe, StabilityReport
from utils.ensemble.band_matrix import BandMatrix, EnsembleConfig, sample_band_matrix
from utils.errors import InvalidConfigError, NearSingularError
from utils.linalg.eigen import SpectralDecomposition, eigenvalues_banded
from utils.linalg.resolvent import BandedResolvent, ComplexShift
from utils.mapping import Mapper, serial_map
from utils.statistics import binomial_stderr, jackknife_mean

logger = logging.getLogger(__name__)

MIN_SAMPLES = 100
DEFAULT_EPS_LADDER = (0.2, 0.1, 0.05)


def spectrum_task(config: EnsembleConfig, index: int) -> SpectralDecomposition:
    return eigenvalues_banded(sample_band_matrix(config, index))


def sample_spectra(config: EnsembleConfig, sample_count: int, mapper: Mapper = serial_map) -> List[SpectralDecomposition]:
    """
    Spectra of samples ``0 .. sample_count-1``.
    """
    return mapper(partial(spectrum_task, config), sample_count)


def _stacked(samples: Sequence[SpectralDecomposition]) -> np.ndarray:
    if not samples:
        raise InvalidConfigError("at least one sample is required")
    orders = {s.order for s in samples}
    if len(orders) != 1:
        raise InvalidConfigError(f"samples mix matrix orders {sorted(orders)}")
    return np.vstack([s.eigenvalues for s in samples])


def lids_estimate(samples: Sequence[SpectralDecomposition], E: float) -> Tuple[float, float]:
    """
    ``E #{j : E_j <= E} / (2N+1)`` with the standard error of the per-sample fractions.
    """
    eigenvalues = _stacked(samples)
    fractions = np.count_nonzero(eigenvalues <= E, axis=1) / eigenvalues.shape[1]
    return jackknife_mean(fractions)


def empirical_lids(samples: Sequence[SpectralDecomposition], E: float) -> float:
    """
    Local integrated density of states at ``E``: the average normalised eigenvalue count below ``E``.

    :param samples: Spectra of equal order.
    :param E: Energy.
    :return: A value in ``[0, 1]``, nondecreasing in ``E``.
    """
    return lids_estimate(samples, E)[0]


def _bin_edges(eigenvalues: np.ndarray, grid, bin_rule) -> np.ndarray:
    grid = np.asarray(grid, dtype=float) if grid is not None else None
    if grid is not None and grid.ndim == 1 and grid.size > 2:
        edges = grid
    else:
        if grid is None:
            lo, hi = float(eigenvalues.min()), float(eigenvalues.max())
        else:
            lo, hi = float(grid[0]), float(grid[1])
        if not hi > lo:
            raise InvalidConfigError(f"degenerate energy range [{lo}, {hi}]")
        if isinstance(bin_rule, str):
            edges = np.histogram_bin_edges(eigenvalues, bins=bin_rule, range=(lo, hi))
        elif isinstance(bin_rule, int):
            edges = np.linspace(lo, hi, bin_rule + 1)
        else:
            width = float(bin_rule)
            if not width > 0:
                raise InvalidConfigError(f"bin width must be > 0, got {width}")
            count = max(1, int(round((hi - lo) / width)))
            edges = lo + width * np.arange(count + 1)
    if edges.size < 2 or np.any(np.diff(edges) <= 0) or not np.all(np.isfinite(edges)):
        raise InvalidConfigError("energy grid must have at least one bin with strictly increasing edges")
    return edges


def dos_histogram(samples: Sequence[SpectralDecomposition], grid=None, bin_rule: Union[str, int, float] = "fd") -> DosEstimate:
    """
    Normalised eigenvalue histogram as a density.

    :param samples: At least 100 spectra of equal order.
    :param grid: Bin edges (array of 3 or more values), an ``(lo, hi)`` range, or ``None`` for the data range.
    :param bin_rule: numpy bin rule name (Freedman-Diaconis ``"fd"`` by default), a bin count or a bin width.
    :return: Estimate on the bin centres with binomial standard errors.
    :raises InvalidConfigError: On too few samples or a degenerate grid.
    """
    if len(samples) < MIN_SAMPLES:
        raise InvalidConfigError(f"histogram needs at least {MIN_SAMPLES} samples, got {len(samples)}")
    eigenvalues = _stacked(samples).ravel()
    edges = _bin_edges(eigenvalues, grid, bin_rule)
    counts, _ = np.histogram(eigenvalues, bins=edges)
    total = eigenvalues.size
    widths = np.diff(edges)
    values = counts / (total * widths)
    stderr = binomial_stderr(counts, total) / widths
    inside = int(counts.sum())
    estimate = DosEstimate(
        energy_grid=0.5 * (edges[:-1] + edges[1:]),
        values=values,
        stderr=stderr,
        method="histogram",
        smoothing=float(widths.mean()),
        sample_count=len(samples),
        metadata={"edges": edges, "tail_mass": 1.0 - inside / total, "bin_rule": str(bin_rule)},
    )
    logger.info("Histogram DOS: %d bins, %d samples, tail mass %.2e", len(widths), len(samples), estimate.metadata["tail_mass"])
    return estimate


def dos_kde(samples: Sequence[SpectralDecomposition], energy_grid, batches: int = 10) -> DosEstimate:
    """
    Gaussian-kernel density estimate with Silverman's bandwidth; stderr from batch means.
    """
    if len(samples) < MIN_SAMPLES:
        raise InvalidConfigError(f"kde needs at least {MIN_SAMPLES} samples, got {len(samples)}")
    grid = np.asarray(energy_grid, dtype=float)
    eigenvalues = _stacked(samples)
    pooled = eigenvalues.ravel()
    kde = stats.gaussian_kde(pooled, bw_method="silverman")
    bandwidth = float(np.sqrt(kde.covariance[0, 0]))
    values = kde(grid)

    batch_values = []
    for rows in np.array_split(eigenvalues, batches):
        data = rows.ravel()
        spread = float(data.std(ddof=1))
        batch_kde = stats.gaussian_kde(data, bw_method=bandwidth / spread if spread > 0 else None)
        batch_values.append(batch_kde(grid))
    stderr = np.std(batch_values, axis=0, ddof=1) / math.sqrt(batches)
    return DosEstimate(grid, values, stderr, "kde", bandwidth, len(samples), {"batches": batches})


def richardson_weights(eps_ladder: Sequence[float]) -> np.ndarray:
    """
    Lagrange weights extrapolating values at ``eps_ladder`` to ``eps = 0``.

    For ``(0.2, 0.1, 0.05)`` these are ``(1/3, -2, 8/3)``.
    """
    eps = np.asarray(eps_ladder, dtype=float)
    if len(set(eps.tolist())) != len(eps) or np.any(eps <= 0):
        raise InvalidConfigError(f"eps ladder must hold distinct positive values, got {tuple(eps_ladder)}")
    weights = np.ones(len(eps))
    for i in range(len(eps)):
        for j in range(len(eps)):
            if i != j:
                weights[i] *= -eps[j] / (eps[i] - eps[j])
    return weights


def richardson_extrapolate(eps_ladder: Sequence[float], values) -> np.ndarray:
    """
    Extrapolate per-eps rows of ``values`` (first axis follows ``eps_ladder``) to ``eps = 0``.
    """
    return np.tensordot(richardson_weights(eps_ladder), np.asarray(values, dtype=float), axes=1)


def resolvent_task(config: EnsembleConfig, energy_grid: np.ndarray, ladder: Tuple[float, ...], variant: str, index: int):
    """
    One sample's ``(1/pi) Im G(E + i eps)`` on the grid for every eps of the ladder.

    :return: ``(values of shape (len(ladder), len(grid)), retried)``.
    """
    H = sample_band_matrix(config, index)
    out = np.empty((len(ladder), len(energy_grid)))
    retried = False
    if variant == "trace":
        eigenvalues = eigenvalues_banded(H).eigenvalues
        for a, eps in enumerate(ladder):
            offsets = eigenvalues[None, :] - energy_grid[:, None]
            out[a] = np.mean(eps / (offsets * offsets + eps * eps), axis=1) / math.pi
        return out, retried
    for a, eps in enumerate(ladder):
        for b, E in enumerate(energy_grid):
            shift = ComplexShift(float(E), eps)
            try:
                g = BandedResolvent(H, shift).entry(0, 0)
            except NearSingularError:
                retried = True
                g = BandedResolvent(H, shift.widened()).entry(0, 0)
            out[a, b] = g.imag / math.pi
    return out, retried


def dos_resolvent(
    config: EnsembleConfig,
    energy_grid,
    eps: Union[float, Sequence[float]] = DEFAULT_EPS_LADDER,
    sample_count: int = 1000,
    variant: str = "trace",
    mapper: Mapper = serial_map,
) -> DosEstimate:
    """
    Resolvent representation of the local density of states.

    ``variant="trace"`` returns ``(1/pi)(1/(2N+1)) sum_j E Im G_jj(E + i eps)``; ``variant="center"``
    returns the infinite-volume estimator ``(1/pi) E Im G_00(E + i eps)``. A sequence of eps values
    is extrapolated to ``eps = 0`` sample by sample.

    :param config: Ensemble.
    :param energy_grid: Energies.
    :param eps: One ``eps > 0`` or an eps ladder.
    :param sample_count: Number of matrices.
    :param variant: ``"trace"`` or ``"center"``.
    :param mapper: Per-sample mapper.
    :return: Estimate with ``metadata["retried_samples"]`` listing samples solved at ``2 eps``.
    """
    ladder = (float(eps),) if np.ndim(eps) == 0 else tuple(float(e) for e in eps)
    if any(not e > 0 for e in ladder):
        raise InvalidConfigError(f"eps must be > 0, got {ladder}")
    if variant not in ("trace", "center"):
        raise InvalidConfigError(f"unknown resolvent variant '{variant}'")
    if sample_count < 2:
        raise InvalidConfigError("resolvent estimator needs at least two samples")
    grid = np.asarray(energy_grid, dtype=float)

    results = mapper(partial(resolvent_task, config, grid, ladder, variant), sample_count)
    per_eps = np.stack([values for values, _ in results])
    retried = [i for i, (_, flag) in enumerate(results) if flag]
    if retried:
        logger.warning("Resolvent DOS: %d samples were re-solved at 2*eps", len(retried))

    per_sample = per_eps[:, 0, :] if len(ladder) == 1 else np.stack([richardson_extrapolate(ladder, v) for v in per_eps])
    mean, stderr = jackknife_mean(per_sample)
    per_eps_mean = per_eps.mean(axis=0)
    estimate = DosEstimate(
        energy_grid=grid,
        values=np.maximum(mean, 0.0),
        stderr=stderr,
        method="resolvent",
        smoothing=min(ladder),
        sample_count=sample_count,
        metadata={
            "variant": variant,
            "eps_ladder": list(ladder),
            "per_eps": {str(e): per_eps_mean[a].tolist() for a, e in enumerate(ladder)},
            "retried_samples": retried,
            "N": config.half_size,
            "L": config.bandwidth_half,
        },
    )
    logger.info("Resolvent DOS (%s): N=%d L=%d eps=%s samples=%d", variant, config.half_size, config.bandwidth_half, ladder, sample_count)
    return estimate


def dos_upper_bound(sup_norm: float, bandwidth_half: int) -> float:
    """
    Uniform bound ``2 pi ||rho||_inf L^{1/2}`` on the local density of states, with ``L^{1/2}`` read as ``max(L, 1)^{1/2}``.
    """
    return 2.0 * math.pi * sup_norm * math.sqrt(max(bandwidth_half, 1))


def _interior_diagonal_powers(H: BandMatrix, p_max: int) -> List[np.ndarray]:
    """
    Diagonals of ``H^p`` for ``p = 0 .. p_max`` via ``diag(H^p) = rowsum(H^a * H^b)``, ``a + b = p``.
    """
    A = H.to_sparse()
    powers = [None, A]
    for _ in range(2, (p_max + 1) // 2 + 1):
        powers.append(powers[-1] @ A)
    diagonals = [np.ones(H.order)]
    for p in range(1, p_max + 1):
        a, b = p // 2, p - p // 2
        if a == 0:
            diagonals.append(A.diagonal())
        else:
            diagonals.append(np.asarray(powers[a].multiply(powers[b]).sum(axis=1)).ravel())
    return diagonals


def dos_moments(samples, p_max: int, interior: bool = False, bandwidth_half: Optional[int] = None) -> List[MomentEstimate]:
    """
    Moments ``mu^(p) = (1/(2N+1)) E sum_j lambda_j^p`` for ``p = 0 .. p_max`` with jackknife errors.

    :param samples: Spectra, or band matrices (required for ``interior``).
    :param p_max: Highest moment order.
    :param interior: Average ``(H^p)_jj`` over ``|j| <= N - L`` only.
    :param bandwidth_half: ``L`` recorded in the estimates when ``samples`` are spectra.
    :return: One estimate per order; ``p = 0`` is exactly 1.
    """
    if len(samples) < MIN_SAMPLES:
        raise InvalidConfigError(f"moments need at least {MIN_SAMPLES} samples, got {len(samples)}")
    if p_max < 0:
        raise InvalidConfigError("p_max must be >= 0")
    matrices = isinstance(samples[0], BandMatrix)
    if interior and not matrices:
        raise InvalidConfigError("interior moments need the band matrices, not their spectra")
    if matrices:
        bandwidth_half = samples[0].half_bandwidth
    n_half = (samples[0].order - 1) // 2

    per_sample = np.empty((len(samples), p_max + 1))
    for row, sample in enumerate(samples):
        if interior:
            L = sample.half_bandwidth
            lo, hi = L, sample.order - L
            if hi <= lo:
                raise InvalidConfigError(f"no interior sites for N={n_half}, L={L}")
            for p, diagonal in enumerate(_interior_diagonal_powers(sample, p_max)):
                per_sample[row, p] = diagonal[lo:hi].mean()
        else:
            eigenvalues = eigenvalues_banded(sample).eigenvalues if matrices else sample.eigenvalues
            per_sample[row] = [np.mean(eigenvalues**p) for p in range(p_max + 1)]

    estimates = [MomentEstimate(0, 1.0, 0.0, n_half, bandwidth_half, interior)]
    for p in range(1, p_max + 1):
        value, stderr = jackknife_mean(per_sample[:, p])
        estimates.append(MomentEstimate(p, value, stderr, n_half, bandwidth_half, interior))
    return estimates


def sample_matrices(config: EnsembleConfig, sample_count: int, mapper: Mapper = serial_map) -> List[BandMatrix]:
    return mapper(partial(sample_band_matrix, config), sample_count)


def convergence_task(config: EnsembleConfig, config_prime: EnsembleConfig, energy_grid, ladder, index: int) -> np.ndarray:
    first, _ = resolvent_task(config, energy_grid, ladder, "trace", index)
    second, _ = resolvent_task(config_prime, energy_grid, ladder, "trace", index)
    difference = first - second
    return difference[0] if len(ladder) == 1 else richardson_extrapolate(ladder, difference)


def dos_convergence_gap(
    config: EnsembleConfig,
    config_prime: EnsembleConfig,
    energy_grid,
    eps: Union[float, Sequence[float]] = DEFAULT_EPS_LADDER,
    sample_count: int = 1000,
    mapper: Mapper = serial_map,
) -> ConvergenceGap:
    """
    ``sup_E |n^N(E) - n^{N'}(E)|`` from the resolvent estimator on coupled samples.

    Both ensembles share seed and entries on common positions, so the per-sample difference is
    averaged and ``N' = N`` gives exactly zero.
    """
    if config_prime.half_size < config.half_size:
        raise InvalidConfigError("N' must be >= N")
    if (config.bandwidth_half, config.density, config.master_seed) != (
        config_prime.bandwidth_half,
        config_prime.density,
        config_prime.master_seed,
    ):
        raise InvalidConfigError("convergence gaps need the same L, density and seed at both sizes")
    ladder = (float(eps),) if np.ndim(eps) == 0 else tuple(float(e) for e in eps)
    grid = np.asarray(energy_grid, dtype=float)
    differences = np.stack(mapper(partial(convergence_task, config, config_prime, grid, ladder), sample_count))
    mean, stderr = jackknife_mean(differences)
    at = int(np.argmax(np.abs(mean)))
    gap = ConvergenceGap(float(abs(mean[at])), float(stderr[at]), float(grid[at]), config.half_size, config_prime.half_size)
    logger.info("DOS gap N=%d -> N'=%d: %.4g +/- %.2g at E=%.3f", gap.N, gap.N_prime, gap.gap, gap.stderr, gap.at_energy)
    return gap


_STENCILS = {
    1: np.array([-0.5, 0.0, 0.5]),
    2: np.array([1.0, -2.0, 1.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
}


def smoothness_probe(estimate: DosEstimate, order: int) -> SmoothnessProbe:
    """
    Central finite differences of ``order`` 1, 2 or 3 with propagated error bars.

    Grid errors are treated as independent. Orders above 2 are flagged noise-dominated when the
    median error bar exceeds the median derivative magnitude.
    """
    if order not in _STENCILS:
        raise InvalidConfigError(f"finite-difference order must be 1, 2 or 3, got {order}")
    grid = np.asarray(estimate.energy_grid, dtype=float)
    steps = np.diff(grid)
    if grid.size < len(_STENCILS[order]) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise InvalidConfigError("finite differences need a uniform grid with enough points")
    h = float(steps[0])
    stencil = _STENCILS[order] / h**order
    derivative = np.convolve(estimate.values, stencil[::-1], mode="valid")
    stderr = np.sqrt(np.convolve(np.asarray(estimate.stderr) ** 2, (stencil**2)[::-1], mode="valid"))
    half = len(stencil) // 2
    noisy = order > 2 and float(np.median(stderr)) > float(np.median(np.abs(derivative)))
    if noisy:
        logger.warning("Order-%d derivative of the %s estimate is noise-dominated", order, estimate.method)
    return SmoothnessProbe(order, grid[half : grid.size - half], derivative, stderr, noisy)


def refinement_stability(coarse: SmoothnessProbe, fine: SmoothnessProbe, sigmas: float = 3.0) -> StabilityReport:
    """
    Compare derivative estimates on a coarse and a refined grid where they overlap.
    """
    lo = max(coarse.energy_grid[0], fine.energy_grid[0])
    hi = min(coarse.energy_grid[-1], fine.energy_grid[-1])
    mask = (coarse.energy_grid >= lo) & (coarse.energy_grid <= hi)
    if not np.any(mask):
        raise InvalidConfigError("derivative estimates do not overlap")
    points = coarse.energy_grid[mask]
    fine_value = np.interp(points, fine.energy_grid, fine.derivative)
    fine_error = np.interp(points, fine.energy_grid, fine.stderr)
    combined = np.sqrt(coarse.stderr[mask] ** 2 + fine_error**2)
    z = np.abs(coarse.derivative[mask] - fine_value) / np.maximum(combined, 1e-300)
    max_z = float(z.max())
    return StabilityReport(max_z, max_z <= sigmas, int(mask.sum()))
