import math

import numpy as np
import pytest

from utils.dos import (
    dos_convergence_gap,
    dos_histogram,
    dos_kde,
    dos_moments,
    dos_resolvent,
    dos_upper_bound,
    empirical_lids,
    lids_estimate,
    moments_frame,
    refinement_stability,
    richardson_extrapolate,
    richardson_weights,
    sample_matrices,
    sample_spectra,
    semicircle_cdf,
    semicircle_density,
    semicircle_moment,
    smoothness_probe,
)
from utils.dos.models import DosEstimate
from utils.ensemble import DensitySpec, EnsembleConfig
from utils.errors import InvalidConfigError


@pytest.fixture(scope="module")
def diagonal_spectra():
    config = EnsembleConfig(half_size=10, bandwidth_half=0, density=DensitySpec.gaussian(), master_seed=5)
    return sample_spectra(config, 200)


@pytest.fixture(scope="module")
def band_spectra():
    config = EnsembleConfig(half_size=20, bandwidth_half=4, density=DensitySpec.gaussian(), master_seed=8)
    return sample_spectra(config, 150)


def test_lids_is_monotone_and_bounded(band_spectra):
    grid = np.linspace(-4.0, 4.0, 17)
    values = [empirical_lids(band_spectra, E) for E in grid]
    assert values[0] >= 0.0 and values[-1] <= 1.0
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert empirical_lids(band_spectra, 100.0) == 1.0


def test_diagonal_lids_matches_site_law(diagonal_spectra):
    value, stderr = lids_estimate(diagonal_spectra, 0.0)
    assert abs(value - 0.5) <= 4.0 * stderr


def test_histogram_integrates_to_one_without_tails(diagonal_spectra):
    estimate = dos_histogram(diagonal_spectra, grid=(-10.0, 10.0), bin_rule=40)
    assert estimate.integral() == pytest.approx(1.0, abs=1e-12)
    assert estimate.metadata["tail_mass"] == 0.0
    assert len(estimate.energy_grid) == 40


def test_histogram_close_to_gaussian_for_diagonal_matrices(diagonal_spectra):
    estimate = dos_histogram(diagonal_spectra, grid=np.linspace(-3.0, 3.0, 13))
    exact = np.exp(-0.5 * estimate.energy_grid**2) / math.sqrt(2.0 * math.pi)
    assert np.max(np.abs(estimate.values - exact)) <= 0.06


def test_histogram_rejects_small_or_degenerate_input(diagonal_spectra):
    with pytest.raises(InvalidConfigError):
        dos_histogram(diagonal_spectra[:50])
    with pytest.raises(InvalidConfigError):
        dos_histogram(diagonal_spectra, grid=(1.0, 1.0))


def test_kde_is_nonnegative_with_stderr(band_spectra):
    grid = np.linspace(-3.0, 3.0, 31)
    estimate = dos_kde(band_spectra, grid)
    assert estimate.method == "kde"
    assert np.all(estimate.values >= 0.0)
    assert np.all(estimate.stderr > 0.0)
    assert estimate.integral() == pytest.approx(1.0, abs=0.05)


def test_richardson_weights_for_halving_ladder():
    np.testing.assert_allclose(richardson_weights((0.2, 0.1, 0.05)), [1.0 / 3.0, -2.0, 8.0 / 3.0], rtol=1e-12)
    quadratic = [1.0 + 2.0 * e + 3.0 * e * e for e in (0.2, 0.1, 0.05)]
    assert float(richardson_extrapolate((0.2, 0.1, 0.05), quadratic)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidConfigError):
        richardson_weights((0.1, 0.1))


def test_resolvent_trace_matches_lorentzian_smoothing(small_ensemble):
    estimate = dos_resolvent(small_ensemble, [0.0, 0.5], eps=0.1, sample_count=20)
    spectra = sample_spectra(small_ensemble, 20)
    manual = np.mean([np.mean(0.1 / ((s.eigenvalues - 0.5) ** 2 + 0.01)) for s in spectra]) / math.pi
    assert estimate.values[1] == pytest.approx(manual, rel=1e-10)
    assert estimate.metadata["retried_samples"] == []


def test_resolvent_center_variant_is_positive(small_ensemble):
    estimate = dos_resolvent(small_ensemble, [0.0], eps=(0.2, 0.1, 0.05), sample_count=100, variant="center")
    assert estimate.values[0] > 0.0
    assert set(estimate.metadata["per_eps"]) == {"0.2", "0.1", "0.05"}


def test_resolvent_rejects_bad_arguments(small_ensemble):
    with pytest.raises(InvalidConfigError):
        dos_resolvent(small_ensemble, [0.0], eps=0.0, sample_count=10)
    with pytest.raises(InvalidConfigError):
        dos_resolvent(small_ensemble, [0.0], eps=0.1, sample_count=10, variant="edge")


def test_upper_bound_uses_unit_bandwidth_for_l_zero():
    rho = 1.0 / math.sqrt(2.0 * math.pi)
    assert dos_upper_bound(rho, 0) == dos_upper_bound(rho, 1) == pytest.approx(math.sqrt(2.0 * math.pi))
    assert dos_upper_bound(rho, 4) == pytest.approx(2.0 * math.sqrt(2.0 * math.pi))


def test_moments_of_diagonal_matrices_are_site_moments(diagonal_spectra):
    moments = dos_moments(diagonal_spectra, 4, bandwidth_half=0)
    assert moments[0].value == 1.0 and moments[0].stderr == 0.0
    assert abs(moments[1].value) <= 4.0 * moments[1].stderr
    assert abs(moments[2].value - 1.0) <= 4.0 * moments[2].stderr
    frame = moments_frame(moments)
    assert frame.columns == ["p", "value", "stderr", "N", "L", "interior"]
    assert frame.height == 5


def test_interior_moments_match_trace_of_powers(small_ensemble):
    matrices = sample_matrices(small_ensemble, 100)
    interior = dos_moments(matrices, 2, interior=True)
    # (H^2)_jj sums the squared row entries; interior rows hold 2L+1 = 5 entries of variance 1/5
    assert abs(interior[2].value - 1.0) <= 4.0 * interior[2].stderr
    with pytest.raises(InvalidConfigError):
        dos_moments(sample_spectra(small_ensemble, 100), 2, interior=True)


def test_semicircle_helpers():
    assert semicircle_density(0.0) == pytest.approx(1.0 / math.pi)
    assert semicircle_density(3.0) == 0.0
    assert semicircle_cdf(0.0) == pytest.approx(0.5)
    assert semicircle_cdf(2.5) == pytest.approx(1.0)
    assert semicircle_moment(2) == pytest.approx(1.0, abs=1e-10)
    assert semicircle_moment(4) == pytest.approx(2.0, abs=1e-10)
    assert semicircle_moment(3) == pytest.approx(0.0, abs=1e-12)


def test_convergence_gap_is_zero_at_equal_sizes(small_ensemble):
    gap = dos_convergence_gap(small_ensemble, small_ensemble, [-0.5, 0.0, 0.5], eps=0.1, sample_count=5)
    assert gap.gap == 0.0


def test_convergence_gap_requires_coupled_configs(small_ensemble):
    with pytest.raises(InvalidConfigError):
        dos_convergence_gap(small_ensemble.with_half_size(20), small_ensemble, [0.0], sample_count=5)
    other = EnsembleConfig(half_size=20, bandwidth_half=2, density=DensitySpec.gaussian(), master_seed=12)
    with pytest.raises(InvalidConfigError):
        dos_convergence_gap(small_ensemble, other, [0.0], sample_count=5)


def _smooth_estimate(step):
    grid = np.arange(-1.0, 1.0 + 1e-9, step)
    return DosEstimate(grid, np.sin(grid), np.full(grid.size, 1e-4), "resolvent", 0.1, 100)


def test_finite_differences_recover_derivatives():
    first = smoothness_probe(_smooth_estimate(0.01), 1)
    np.testing.assert_allclose(first.derivative, np.cos(first.energy_grid), atol=1e-4)
    second = smoothness_probe(_smooth_estimate(0.01), 2)
    np.testing.assert_allclose(second.derivative, -np.sin(second.energy_grid), atol=1e-3)
    with pytest.raises(InvalidConfigError):
        smoothness_probe(_smooth_estimate(0.01), 4)


def test_refinement_stability_of_a_smooth_function():
    coarse = smoothness_probe(_smooth_estimate(0.1), 1)
    fine = smoothness_probe(_smooth_estimate(0.05), 1)
    report = refinement_stability(coarse, fine)
    assert report.stable
    assert report.compared_points > 0


@pytest.mark.parametrize("bandwidth_half", [0, 1, 2])
def test_histogram_and_resolvent_estimates_agree(bandwidth_half):
    config = EnsembleConfig(half_size=20, bandwidth_half=bandwidth_half, density=DensitySpec.gaussian(), master_seed=21)
    histogram = dos_histogram(sample_spectra(config, 400), grid=np.linspace(-1.5, 1.5, 13))
    resolvent = dos_resolvent(config, histogram.energy_grid, eps=(0.2, 0.1, 0.05), sample_count=400)
    combined = np.sqrt(histogram.stderr**2 + resolvent.stderr**2)
    assert np.all(np.abs(histogram.values - resolvent.values) <= 4.0 * combined + 0.02)


@pytest.mark.parametrize("half_size, sample_count", [(10, 1600), (40, 400), (160, 100)])
def test_second_moment_matches_finite_volume_value(half_size, sample_count):
    config = EnsembleConfig(half_size=half_size, bandwidth_half=2, density=DensitySpec.gaussian(), master_seed=4)
    second = dos_moments(sample_spectra(config, sample_count), 2, bandwidth_half=2)[2]
    # boundary rows of the band hold fewer than 2L+1 entries
    exact = 1.0 - 2 * 3 / ((2 * half_size + 1) * 5)
    assert abs(second.value - exact) <= 4.0 * second.stderr
    assert abs(second.value - 1.0) <= 4.0 * second.stderr + 6.0 / (2 * half_size + 1)


def test_lids_differences_reproduce_the_histogram(band_spectra):
    edges = np.linspace(-2.0, 2.0, 21)
    step = edges[1] - edges[0]
    lids = np.array([empirical_lids(band_spectra, E) for E in edges])
    histogram = dos_histogram(band_spectra, grid=edges)
    np.testing.assert_allclose(np.diff(lids) / step, histogram.values, atol=1e-9)
    np.testing.assert_allclose(lids[0] + np.cumsum(histogram.values) * step, lids[1:], atol=1e-9)
