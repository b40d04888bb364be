import numpy as np
import pytest

from utils.ensemble import RngStream, sample_band_matrix
from utils.errors import InvalidConfigError
from utils.linalg import check_duhamel, check_resolvent_integral, random_normal_pair
from utils.linalg.identities import default_cutoff


def test_default_cutoff_meets_tail_tolerance():
    T = default_cutoff(0.5)
    assert np.exp(-0.5 * T) / 0.5 == pytest.approx(1e-12, rel=1e-9)


def test_resolvent_integral_on_a_band_sample(small_ensemble):
    A = sample_band_matrix(small_ensemble.with_half_size(3), 0).to_dense()
    report = check_resolvent_integral(A, E=0.3, eps=0.5)
    assert report.within_bound
    assert report.residual <= 1e-6


def test_truncated_resolvent_integral_stays_within_tail_bound():
    A = np.diag([-1.0, 0.0, 2.0])
    report = check_resolvent_integral(A, E=0.0, eps=1.0, quad_cutoff=5.0)
    assert report.tail_bound == pytest.approx(np.exp(-5.0))
    assert report.within_bound
    assert report.residual > 1e-4


def test_resolvent_integral_needs_positive_eps():
    with pytest.raises(InvalidConfigError):
        check_resolvent_integral(np.eye(2), 0.0, 0.0)


def test_duhamel_identity_and_bound_for_normal_pair():
    A, B = random_normal_pair(RngStream(9, 0), 5)
    report = check_duhamel(A, B, t=1.0, s=0.5)
    assert report.bound_applicable
    assert report.identity_residual <= 1e-8
    assert report.slack >= 0.0
    assert report.passed


def test_duhamel_at_time_zero_is_trivial():
    A, B = random_normal_pair(RngStream(9, 1), 3)
    report = check_duhamel(A, B, t=0.0, s=0.3)
    assert report.lhs_norm == 0.0
    assert report.identity_residual == 0.0


def test_duhamel_bound_not_applicable_for_non_normal_matrices():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    report = check_duhamel(A, np.zeros((2, 2)), t=0.7, s=0.5)
    assert not report.bound_applicable
    assert report.identity_residual <= 1e-8


@pytest.mark.parametrize("t,s", [(-1.0, 0.5), (1.0, 1.5), (1.0, -0.1)])
def test_duhamel_rejects_bad_parameters(t, s):
    with pytest.raises(InvalidConfigError):
        check_duhamel(np.eye(2), np.eye(2), t, s)


def test_random_normal_pair_has_upper_half_plane_spectrum():
    A, B = random_normal_pair(RngStream(4, 2), 4)
    for X in (A, B):
        np.testing.assert_allclose(X @ X.conj().T, X.conj().T @ X, atol=1e-10)
        assert np.all(np.linalg.eigvals(X).imag >= -1e-10)
