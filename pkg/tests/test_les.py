import math

import numpy as np
import pytest
from scipy import stats

from utils.ensemble import DensitySpec, EnsembleConfig, sample_band_matrix
from utils.errors import InvalidConfigError, InvalidIntensityError
from utils.linalg import SpectralDecomposition, eigenvalues_banded
from utils.les import (
    CountStatistics,
    Window,
    block_dvj,
    block_length,
    block_superposed_process,
    count_statistics,
    dvj_criteria,
    intensity_pipeline,
    minami_bound,
    minami_gap_check,
    poisson_gof,
    poisson_k_max,
    rescale_eigenvalues,
    sample_realizations,
    stieltjes_intensity,
    tv_distance,
    wegner_bound,
    wegner_minami_empirical,
    window_gap_cdf,
)


def _poisson_counts(lam, n=10000):
    return stats.poisson.ppf((np.arange(n) + 0.5) / n, lam).astype(int)


def test_window_is_half_open():
    window = Window(0.0, 1.0)
    assert window.count([0.0, 0.5, 1.0]) == 2
    assert Window(-1.0, 0.0).count([0.0]) + window.count([0.0]) == 1
    with pytest.raises(InvalidConfigError):
        Window(1.0, 0.0)


def test_rescaling_maps_eigenvalues_into_window():
    spectrum = SpectralDecomposition(np.array([-0.5, -0.01, 0.0, 0.02, 0.3]))
    realization = rescale_eigenvalues(spectrum, 0.0, 10, Window(-1.0, 1.0))
    np.testing.assert_allclose(realization.points, [-0.21, 0.0, 0.42], atol=1e-12)
    np.testing.assert_allclose(realization.unrescaled(), [-0.01, 0.0, 0.02])
    assert realization.count == 3


def test_count_statistics_of_exact_poisson_counts():
    stats_ = CountStatistics.from_counts(_poisson_counts(1.5), Window(0.0, 1.0))
    assert stats_.mean == pytest.approx(1.5, abs=0.01)
    assert stats_.factorial_moments[1] == pytest.approx(1.5**2, rel=0.02)
    assert stats_.factorial_moments[2] == pytest.approx(1.5**3, rel=0.05)
    assert sum(stats_.histogram.values()) == 10000


def test_count_statistics_needs_a_thousand_realizations():
    with pytest.raises(InvalidConfigError):
        CountStatistics.from_counts([0] * 999, Window(0.0, 1.0))


def test_tv_distance_is_small_for_poisson_counts():
    counts = _poisson_counts(2.0)
    histogram = {int(k): int(v) for k, v in zip(*np.unique(counts, return_counts=True))}
    distance, k_max = tv_distance(histogram, counts.size, 2.0)
    assert distance < 0.01
    assert k_max == poisson_k_max(2.0)
    assert stats.poisson.sf(k_max, 2.0) < 1e-6 <= stats.poisson.sf(k_max - 1, 2.0)


def test_tv_distance_of_a_point_mass():
    distance, _ = tv_distance({1: 1000}, 1000, 1.0)
    assert distance == pytest.approx(1.0 - math.exp(-1.0))


def test_gof_of_empty_window_is_exact():
    window = Window(0.0, 0.0)
    report = poisson_gof(CountStatistics.from_counts([0] * 1000, window), 1.0)
    assert report.expected_count == 0.0
    assert report.tv_distance == 0.0
    assert report.ks_distance is None


def test_gof_rejects_non_positive_intensity():
    with pytest.raises(InvalidIntensityError):
        poisson_gof(CountStatistics.from_counts([0] * 1000, Window(0.0, 1.0)), 0.0)


def test_gof_accepts_poisson_counts():
    report = poisson_gof(CountStatistics.from_counts(_poisson_counts(1.0), Window(0.0, 1.0)), 1.0)
    assert report.tv_distance < 0.01
    assert report.chi2_pvalue > 0.05
    assert report.to_dict()["intensity"] == 1.0


def test_window_gap_cdf_endpoints_and_monotonicity():
    g = np.linspace(0.0, 2.0, 41)
    cdf = window_gap_cdf(g, 1.5, 2.0)
    assert cdf[0] == 0.0
    assert cdf[-1] == pytest.approx(1.0)
    assert np.all(np.diff(cdf) > 0)
    assert window_gap_cdf(5.0, 1.5, 2.0) == pytest.approx(1.0)


def test_wegner_and_minami_bounds():
    rho = 1.0 / math.sqrt(2.0 * math.pi)
    assert wegner_bound(rho, 1, 10, 0.01) == pytest.approx(0.263196, rel=1e-5)
    assert minami_bound(rho, 1, 10, 0.01) == pytest.approx(wegner_bound(rho, 1, 10, 0.01) ** 2)
    assert wegner_bound(rho, 0, 10, 0.01) == wegner_bound(rho, 1, 10, 0.01)


def test_wegner_minami_on_diagonal_matrices(diagonal_ensemble):
    report = wegner_minami_empirical(diagonal_ensemble, (0.0, 0.05), 1000)
    exact = 21 * (stats.norm.cdf(0.05) - 0.5)
    assert abs(report.mean_count - exact) <= 4.0 * report.mean_stderr
    assert report.wegner_holds()
    assert report.minami_holds()
    assert report.generalized_holds()
    assert report.markov_holds()


def test_wegner_minami_rejects_bad_interval(diagonal_ensemble):
    with pytest.raises(InvalidConfigError):
        wegner_minami_empirical(diagonal_ensemble, (0.1, 0.1), 1000)
    with pytest.raises(InvalidConfigError):
        wegner_minami_empirical(diagonal_ensemble, (0.0, 0.1), 100)


def test_minami_gap_check_on_poisson_counts():
    check = minami_gap_check(CountStatistics.from_counts(_poisson_counts(0.2), Window(0.0, 1.0)))
    assert check.holds
    assert check.gap <= check.tau


def test_diagonal_ensemble_gives_poisson_counts(diagonal_ensemble):
    realizations = sample_realizations(diagonal_ensemble, 0.0, Window.centered(0.0, 2.0), 1000)
    count_stats = count_statistics(realizations)
    intensity = 1.0 / math.sqrt(2.0 * math.pi)
    report = poisson_gof(count_stats, intensity)
    assert report.tv_distance < 0.08
    assert report.ks_distance is not None


def test_count_statistics_on_a_sub_window(diagonal_ensemble):
    realizations = sample_realizations(diagonal_ensemble, 0.0, Window(-2.0, 2.0), 1000)
    whole = count_statistics(realizations)
    left = count_statistics(realizations, Window(-2.0, 0.0))
    right = count_statistics(realizations, Window(0.0, 2.0))
    assert left.mean + right.mean == pytest.approx(whole.mean)


def test_stieltjes_intensity_near_site_density(diagonal_ensemble):
    estimate, stderr = stieltjes_intensity(diagonal_ensemble.with_half_size(200), 0.0, 200)
    assert estimate == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=max(4.0 * stderr, 0.02))
    with pytest.raises(InvalidConfigError):
        stieltjes_intensity(diagonal_ensemble, 0.0, 10, z=1.0)


def test_block_length_and_bandwidth_guard(small_ensemble):
    assert block_length(40, 0.5) == 9
    assert block_length(40, 1.0) == 81
    with pytest.raises(InvalidConfigError):
        block_length(40, 0.0)
    with pytest.raises(InvalidConfigError):
        block_superposed_process(small_ensemble, 0.0, Window(-1.0, 1.0), 0.1, 0)


def test_block_process_with_full_blocks_is_the_spectrum(small_ensemble):
    realization = block_superposed_process(small_ensemble, 0.0, Window(-50.0, 50.0), 1.0, 0)
    full = sample_realizations(small_ensemble, 0.0, Window(-50.0, 50.0), 1)[0]
    np.testing.assert_allclose(realization.points, full.points, atol=1e-10)


def test_dvj_criteria_from_block_counts():
    counts = np.array([[0, 1, 0], [2, 0, 0], [0, 0, 1], [0, 0, 0]])
    report = dvj_criteria(counts)
    assert report.negligibility == pytest.approx(0.25)
    assert report.uniqueness == pytest.approx(0.25)
    assert report.intensity == pytest.approx(0.75)
    assert (report.blocks, report.sample_count) == (3, 4)


def test_block_dvj_totals_match_block_counts():
    config = EnsembleConfig(half_size=40, bandwidth_half=1, density=DensitySpec.gaussian(), master_seed=2)
    report, totals = block_dvj(config, 0.0, Window.centered(0.0, 3.0), 0.5, 50)
    assert report.blocks == 9
    assert totals.shape == (50,)
    assert report.negligibility <= 1.0


def test_pipeline_with_known_intensity(diagonal_ensemble):
    intensity = 1.0 / math.sqrt(2.0 * math.pi)
    report = intensity_pipeline(diagonal_ensemble, (5, 10), 0.0, sample_count=1000, intensity=intensity)
    assert report.window.length == pytest.approx(1.0 / intensity)
    assert [row.N for row in report.rows] == [5, 10]
    for row in report.rows:
        assert row.expected_count == pytest.approx(1.0)
        assert abs(row.mean_count - 1.0) <= 4.0 * row.mean_stderr
    assert report.to_frame().height == 2


@pytest.mark.parametrize("delta", [0.01, -0.003, 0.25])
def test_shifting_the_reference_energy_translates_every_point(small_ensemble, delta):
    spectrum = eigenvalues_banded(sample_band_matrix(small_ensemble, 6))
    window = Window(-100.0, 100.0)
    base = rescale_eigenvalues(spectrum, 0.0, small_ensemble.half_size, window)
    shifted = rescale_eigenvalues(spectrum, delta, small_ensemble.half_size, window)
    assert shifted.count == base.count == spectrum.order
    np.testing.assert_allclose(shifted.points, np.asarray(base.points) - 21 * delta, rtol=0.0, atol=1e-12)
