import pytest

from utils.ensemble import DensitySpec
from utils.errors import InvalidConfigError
from utils.localization import decoupling_lower_check, decoupling_upper_check, default_polynomial_grid


def test_lower_decoupling_ratio_is_positive_and_scales_like_eta(gaussian):
    report = decoupling_lower_check(gaussian, 0.3, (10.0, 50.0, 100.0), (-2.0, -1.0, 0.0, 1.0, 2.0))
    assert report.min_ratio > 0.0
    lo, hi = report.c_over_eta_range(eta_min=10.0)
    assert 0.8 <= lo <= hi <= 1.2
    assert report.to_frame().height == 3


def test_lower_decoupling_skips_beta_equal_to_eta(gaussian):
    report = decoupling_lower_check(gaussian, 0.5, (1.0,), (1.0, 0.0))
    assert report.rows[0].worst_beta == 0.0


def test_lower_decoupling_on_a_tabulated_density():
    spec = DensitySpec.tabulated([[-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    report = decoupling_lower_check(spec, 0.3, (0.5, 5.0), (-0.5, 0.0, 0.5))
    assert report.min_ratio > 0.0


@pytest.mark.parametrize("s,eta", [(0.0, 1.0), (1.0, 1.0), (0.3, 0.0)])
def test_lower_decoupling_rejects_bad_arguments(gaussian, s, eta):
    with pytest.raises(InvalidConfigError):
        decoupling_lower_check(gaussian, s, (eta,), (0.5,))


def test_lower_decoupling_needs_lipschitz_density():
    with pytest.raises(InvalidConfigError):
        decoupling_lower_check(DensitySpec.uniform(), 0.3, (1.0,), (0.0,))


def test_upper_decoupling_constant_is_finite_and_stable(gaussian):
    report = decoupling_upper_check(gaussian, 0.3)
    assert len(report.rows) == len(default_polynomial_grid()) == 27
    assert report.gamma == pytest.approx(1.2)
    assert 0.0 < report.max_ratio < 2.0
    assert report.variation < 2.0


def test_upper_decoupling_rejects_real_roots_and_large_s(gaussian):
    with pytest.raises(InvalidConfigError):
        decoupling_upper_check(gaussian, 0.3, poly_grid=[((1.0, 0.0), (1.0, 0.0, -1.0))])
    with pytest.raises(InvalidConfigError):
        decoupling_upper_check(gaussian, 0.5)
    with pytest.raises(InvalidConfigError):
        decoupling_upper_check(gaussian, 0.3, poly_grid=[((1.0, 0.0, 0.0, 0.0, 0.0, 0.0), (1.0, 0.0, 1.0))])
