import math

import numpy as np
import pytest
from scipy import integrate

from utils.ensemble import DensitySpec, EnsembleConfig, sample_band_matrix
from utils.errors import InsufficientDecayRangeError, InvalidConfigError
from utils.linalg import ComplexShift, green_entry
from utils.localization import (
    decay_fit,
    decay_profile,
    fractional_moment,
    high_energy_shift,
    profile_from_rows,
    reduced_resolvent_decay,
    spectral_averaging_bound,
    spectral_averaging_sup,
    volume_difference_decay,
)
from utils.localization.volume import volume_difference_task


@pytest.fixture(scope="module")
def chain():
    return EnsembleConfig(half_size=30, bandwidth_half=1, density=DensitySpec.gaussian(), master_seed=21)


def test_fractional_moment_at_s_zero_is_exactly_one(small_ensemble):
    moment = fractional_moment(small_ensemble, 0.5j, 0.0, 0, 3, 100)
    assert moment.estimate == 1.0
    assert moment.stderr == 0.0


def test_fractional_moment_matches_direct_average(small_ensemble):
    moment = fractional_moment(small_ensemble, complex(0.2, 0.1), 0.5, -1, 2, 100)
    direct = np.mean([abs(green_entry(sample_band_matrix(small_ensemble, i), ComplexShift(0.2, 0.1), -1, 2)) ** 0.5 for i in range(100)])
    assert moment.estimate == pytest.approx(direct, rel=1e-12)
    assert moment.escalated == ()


def test_fractional_moment_validates_arguments(small_ensemble):
    with pytest.raises(InvalidConfigError):
        fractional_moment(small_ensemble, 0.5j, 1.0, 0, 0, 100)
    with pytest.raises(InvalidConfigError):
        fractional_moment(small_ensemble, 0.5j, 0.5, 0, 11, 100)
    with pytest.raises(InvalidConfigError):
        fractional_moment(small_ensemble, 0.5j, 0.5, 0, 0, 10)


def test_fractional_moment_at_real_energy_is_finite(diagonal_ensemble):
    moment = fractional_moment(diagonal_ensemble, 0.0, 0.3, 0, 0, 100)
    assert math.isfinite(moment.estimate)


def test_profile_decays_and_fit_detects_it(chain):
    profile = decay_profile(chain, complex(0.0, 0.0), 0.3, 0, 20, 300)
    assert profile.rows[0].distance == 0
    assert profile.rows[-1].estimate < profile.rows[1].estimate
    fit = decay_fit(profile)
    assert fit.decay_detected
    assert fit.alpha > 0.0
    assert fit.distances_used[0] >= 1


def test_profile_rows_share_one_sample_set(chain):
    profile = decay_profile(chain, 0.5j, 0.3, 5, 10, 100)
    assert {row.sample_count for row in profile.rows} == {100}
    frame = profile.to_frame()
    assert frame.columns == ["d", "estimate", "stderr", "n_samples"]


def test_profile_rejects_ranges_outside_the_matrix(chain):
    with pytest.raises(InvalidConfigError):
        decay_profile(chain, 0.5j, 0.3, 0, 61, 100)
    with pytest.raises(InvalidConfigError):
        decay_profile(chain, 0.5j, 0.3, 31, 1, 100)


def test_decay_fit_on_exact_exponential():
    rows = [(d, math.exp(1.0 - 0.4 * d), 1e-3 * math.exp(1.0 - 0.4 * d), 100) for d in range(10)]
    fit = decay_fit(profile_from_rows(0.3, 0.5j, rows))
    assert fit.alpha == pytest.approx(0.4, rel=1e-9)
    assert fit.log_C == pytest.approx(1.0, rel=1e-9)
    assert fit.predict(3) == pytest.approx(math.exp(1.0 - 1.2))


def test_decay_fit_needs_four_usable_rows():
    rows = [(d, 1.0, 0.5, 100) for d in range(10)]
    with pytest.raises(InsufficientDecayRangeError):
        decay_fit(profile_from_rows(0.3, 0.5j, rows))


def test_high_energy_shift_and_averaging_bound():
    assert high_energy_shift(0) == 5.0
    assert high_energy_shift(4) == pytest.approx(15.0)
    rho = 1.0 / math.sqrt(2.0 * math.pi)
    assert spectral_averaging_bound(rho, 1) == pytest.approx(math.pi * rho * math.sqrt(3.0))


def test_spectral_averaging_stays_below_bound(small_ensemble):
    report = spectral_averaging_sup(small_ensemble, 0.3, [complex(-1, 0.1), complex(0, 0.1), complex(1, 0.1)], 200)
    assert len(report.points) == 3
    assert report.max_imaginary <= report.bound
    assert report.to_frame().height == 3


def test_volume_difference_vanishes_at_full_size(chain):
    report = volume_difference_decay(chain, (10, 20, 30), 0, 1j, 0.1, 50)
    assert report.rows[-1].M == 30
    assert report.rows[-1].green_difference == 0.0
    assert report.rows[-1].psi_difference == 0.0
    assert report.rows[0].green_difference > report.rows[1].green_difference > 0.0


def test_boundary_identity_matches_direct_difference(chain):
    shift = ComplexShift(0.0, 1.0)
    values, _ = volume_difference_task(chain, (5, 12), 0, shift, 0.1, 3)
    H = sample_band_matrix(chain, 3)
    for row, M in enumerate((5, 12)):
        direct = abs(green_entry(H, shift, 0, 0) - green_entry(H.principal_submatrix(-M, M), shift, 0, 0))
        assert values[row, 0] == pytest.approx(direct, rel=1e-6, abs=1e-14)


def test_volume_difference_validates_sizes(chain):
    with pytest.raises(InvalidConfigError):
        volume_difference_decay(chain, (40,), 0, 1j, 0.1, 10)
    with pytest.raises(InvalidConfigError):
        volume_difference_decay(chain, (10,), 10, 1j, 0.1, 10)
    with pytest.raises(InvalidConfigError):
        volume_difference_decay(chain, (10,), 0, 1j, 0.2, 10)


def test_reduced_resolvent_decay_between_neighbour_and_boundary(chain):
    near = reduced_resolvent_decay(chain.with_half_size(5), 0, 1, 5, 0.5j, 0.3, 100)
    far = reduced_resolvent_decay(chain.with_half_size(20), 0, 1, 20, 0.5j, 0.3, 100)
    assert 0.0 < far.estimate < near.estimate


def test_reduced_resolvent_validates_sites(chain):
    with pytest.raises(InvalidConfigError):
        reduced_resolvent_decay(chain, 0, 0, 30, 0.5j, 0.3, 10)
    with pytest.raises(InvalidConfigError):
        reduced_resolvent_decay(chain, 0, 1, 10, 0.5j, 0.3, 10)
    with pytest.raises(InvalidConfigError):
        reduced_resolvent_decay(chain, 0, 1, 30, 0.5j, 0.4, 10)


def test_volume_difference_is_stable_when_the_outer_size_doubles(chain):
    inner = (5, 8)
    smaller = volume_difference_decay(chain.with_half_size(20), inner, 0, 1j, 0.1, 200)
    larger = volume_difference_decay(chain.with_half_size(40), inner, 0, 1j, 0.1, 200)
    for a, b in zip(smaller.rows, larger.rows):
        assert abs(a.green_difference - b.green_difference) <= 2.0 * math.hypot(a.green_stderr, b.green_stderr)
        assert abs(a.psi_difference - b.psi_difference) <= 2.0 * math.hypot(a.psi_stderr, b.psi_stderr)


def test_fractional_moment_is_stable_when_samples_double(chain):
    fewer = fractional_moment(chain, complex(0.3, 0.0), 0.3, 0, 1, 200)
    more = fractional_moment(chain, complex(0.3, 0.0), 0.3, 0, 1, 400)
    assert more.sample_count == 2 * fewer.sample_count
    assert abs(fewer.estimate - more.estimate) <= 3.0 * math.hypot(fewer.stderr, more.stderr)


def test_diagonal_fractional_moment_matches_quadrature(diagonal_ensemble):
    s, z = 0.5, 1j
    exact, _ = integrate.quad(lambda v: abs(v - z) ** -s * math.exp(-0.5 * v * v) / math.sqrt(2.0 * math.pi), -math.inf, math.inf)
    moment = fractional_moment(diagonal_ensemble, z, s, 0, 0, 1000)
    assert abs(moment.estimate - exact) <= 4.0 * moment.stderr


def test_reduced_resolvent_rejects_the_reduced_site_itself(chain):
    # row j of the reduced resolvent is -e_j / z, so i = j carries no decay
    for i in (0, 2):
        with pytest.raises(InvalidConfigError, match="0 < \\|i - j\\| <= L"):
            reduced_resolvent_decay(chain, 0, i, 30, 0.5j, 0.3, 100)
