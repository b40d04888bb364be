import math

import numpy as np
import pytest

from utils.ensemble import (
    BandMatrix,
    DensitySpec,
    EnsembleConfig,
    RngStream,
    assumption1_report,
    density_cdf,
    density_eval,
    density_ppf,
    density_sample,
    density_sample_many,
    fourier_bound,
    sample_band_matrix,
)
from utils.errors import InvalidConfigError


def test_stream_replays_bit_exactly():
    first = RngStream(7, 3, (1, 0)).uniforms(32)
    replay = RngStream(7, 3, (1, 0)).uniforms(32)
    assert np.array_equal(first, replay)
    assert np.all((first > 0.0) & (first < 1.0))


def test_streams_with_other_keys_differ():
    base = RngStream(7, 3).uniforms(8)
    assert not np.array_equal(base, RngStream(7, 4).uniforms(8))
    assert not np.array_equal(base, RngStream(8, 3).uniforms(8))
    assert not np.array_equal(base, RngStream(7, 3).spawn(0).uniforms(8))


def test_stream_rejects_negative_keys():
    with pytest.raises(InvalidConfigError):
        RngStream(-1, 0)
    with pytest.raises(InvalidConfigError):
        RngStream(1, 0, (2**64,))


def test_sample_many_matches_successive_single_draws(gaussian):
    many = density_sample_many(gaussian, RngStream(1, 0), 6)
    stream = RngStream(1, 0)
    single = [density_sample(gaussian, stream) for _ in range(6)]
    assert np.array_equal(many, np.array(single))


def test_gaussian_density_values(gaussian):
    assert density_eval(gaussian, 0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), rel=1e-12)
    assert density_cdf(gaussian, 0.0) == pytest.approx(0.5)
    assert gaussian.sup_norm == pytest.approx(1.0 / math.sqrt(2.0 * math.pi))
    assert density_ppf(gaussian, density_cdf(gaussian, 0.7)) == pytest.approx(0.7, abs=1e-9)


def test_uniform_density_is_centred_with_width_scale():
    spec = DensitySpec.uniform(mean=1.0, scale=2.0)
    assert density_eval(spec, 1.5) == pytest.approx(0.5)
    assert density_eval(spec, 2.5) == 0.0
    assert density_cdf(spec, 1.0) == pytest.approx(0.5)
    assert spec.law.support() == (0.0, 2.0)


def test_tabulated_density_is_normalised():
    spec = DensitySpec.tabulated([[0.0, 0.0], [1.0, 2.0], [2.0, 0.0]])
    assert density_eval(spec, 1.0) == pytest.approx(1.0)
    assert density_eval(spec, 3.0) == 0.0
    assert density_cdf(spec, 1.0) == pytest.approx(0.5)
    assert density_ppf(spec, 0.125) == pytest.approx(0.5)
    assert spec.sup_norm == pytest.approx(1.0)


@pytest.mark.parametrize(
    "table",
    [
        [[0.0, 1.0]],
        [[1.0, 1.0], [0.0, 1.0]],
        [[0.0, -1.0], [1.0, 1.0]],
        [[0.0, 0.0], [1.0, 0.0]],
    ],
)
def test_tabulated_density_rejects_bad_tables(table):
    with pytest.raises(InvalidConfigError):
        DensitySpec.tabulated(table)


def test_declared_sup_norm_below_maximum_is_rejected():
    with pytest.raises(InvalidConfigError):
        DensitySpec(kind="gaussian", sup_norm=0.1)


def test_gaussian_regularity_is_declared(gaussian):
    report = assumption1_report(gaussian)
    assert report.k == "inf"
    assert report.passed
    assert {report.status(c) for c in (1, 2, 3, 4)} == {"declared"}


def test_uniform_density_fails_continuity_above_order_zero():
    report = assumption1_report(DensitySpec.uniform(), k=1)
    assert report.status(1) == "fail"
    assert not report.passed


def test_uniform_density_fails_with_default_order():
    report = assumption1_report(DensitySpec.uniform())
    assert report.k == "1"
    assert report.status(1) == "fail"
    assert report.status(2) == "fail"
    assert not report.passed
    assert not any(r.condition == 1 and r.status == "pass" for r in report.results)
    with pytest.raises(InvalidConfigError):
        assumption1_report(DensitySpec.uniform(), k=0)


def test_tent_density_passes_first_order():
    report = assumption1_report(DensitySpec.tabulated([[-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))
    assert report.k == "1"
    assert report.status(1) == "pass"
    assert report.status(2) == "pass"


def test_fourier_bound_of_gaussian_decays(gaussian):
    inner, outer = fourier_bound(gaussian, 2)
    assert inner >= 1.0
    assert outer < 1e-100


def test_ensemble_config_validates_ranges(gaussian):
    with pytest.raises(InvalidConfigError):
        EnsembleConfig(half_size=2, bandwidth_half=5, density=gaussian)
    with pytest.raises(InvalidConfigError):
        EnsembleConfig(half_size=-1, bandwidth_half=0, density=gaussian)
    with pytest.raises(InvalidConfigError):
        EnsembleConfig(half_size=2, bandwidth_half=1, density=gaussian, master_seed=2**64)


def test_ensemble_config_dict_round_trip(small_ensemble):
    assert EnsembleConfig.from_dict(small_ensemble.to_dict()) == small_ensemble


def test_sample_is_symmetric_banded_and_scaled(small_ensemble):
    H = sample_band_matrix(small_ensemble, 0)
    dense = H.to_dense()
    assert H.order == 21 and H.index_min == -10
    assert np.array_equal(dense, dense.T)
    rows, cols = np.indices(dense.shape)
    assert np.all(dense[np.abs(rows - cols) > 2] == 0.0)
    raw = sample_band_matrix(small_ensemble, 0, scale_entries=False)
    np.testing.assert_allclose(H.band * math.sqrt(5.0), raw.band, rtol=1e-15)


def test_sample_replays_and_differs_between_indices(small_ensemble):
    assert sample_band_matrix(small_ensemble, 3) == sample_band_matrix(small_ensemble, 3)
    assert sample_band_matrix(small_ensemble, 3) != sample_band_matrix(small_ensemble, 4)


def test_smaller_volume_is_a_principal_restriction(small_ensemble):
    big = sample_band_matrix(small_ensemble, 2)
    small = sample_band_matrix(small_ensemble.with_half_size(5), 2)
    assert big.principal_submatrix(-5, 5) == small
    np.testing.assert_array_equal(big.to_dense()[5:16, 5:16], small.to_dense())


def test_negative_sample_index_is_rejected(small_ensemble):
    with pytest.raises(InvalidConfigError):
        sample_band_matrix(small_ensemble, -1)


def test_zero_size_matrix_is_one_by_one(gaussian):
    H = sample_band_matrix(EnsembleConfig(half_size=0, bandwidth_half=0, density=gaussian, master_seed=3), 0)
    assert H.order == 1 and H.index_min == 0


def test_band_matrix_dense_round_trip():
    dense = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.0, -1.0, 4.0]])
    H = BandMatrix.from_dense(dense, 1)
    assert H.index_min == -1
    np.testing.assert_array_equal(H.to_dense(), dense)
    np.testing.assert_array_equal(H.to_sparse().toarray(), dense)
    assert H.entry(0, 1) == -1.0
    assert H.norm_bound() == pytest.approx(5.0)
    with pytest.raises(InvalidConfigError):
        H.position(2)


def _off_diagonal_band_entries(config, indices):
    order = 2 * config.half_size + 1
    rows, cols = np.tril_indices(order, -1)
    keep = rows - cols <= config.bandwidth_half
    return np.stack([sample_band_matrix(config, i).to_dense()[rows[keep], cols[keep]] for i in indices])


@pytest.mark.slow
def test_band_entry_variance_is_scaled_site_variance(gaussian):
    config = EnsembleConfig(half_size=50, bandwidth_half=4, density=gaussian, master_seed=17)
    entries = _off_diagonal_band_entries(config, range(250)).ravel()
    assert entries.size > 100000
    squares = (entries - entries.mean()) ** 2
    stderr = squares.std(ddof=1) / math.sqrt(entries.size)
    assert abs(squares.mean() - 1.0 / 9.0) <= 3.0 * stderr


@pytest.mark.slow
def test_distinct_sample_streams_are_uncorrelated(gaussian):
    config = EnsembleConfig(half_size=50, bandwidth_half=4, density=gaussian, master_seed=17)
    first = _off_diagonal_band_entries(config, range(0, 500, 2)).ravel()
    second = _off_diagonal_band_entries(config, range(1, 500, 2)).ravel()
    assert first.size > 100000
    assert abs(np.corrcoef(first, second)[0, 1]) < 0.01
