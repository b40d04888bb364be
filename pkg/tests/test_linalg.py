import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from utils.ensemble import DensitySpec, EnsembleConfig, sample_band_matrix
from utils.ensemble.band_matrix import BandMatrix
from utils.errors import InvalidConfigError, NearSingularError
from utils.linalg import (
    BandedResolvent,
    ComplexShift,
    eigenvalues_banded,
    green_column,
    green_entry,
    reduced_matrix,
    resolvent_trace,
    schur_block_inverse,
)

ORACLE_TOLERANCE = 1e-10


@st.composite
def band_matrices(draw, max_half_size=12):
    n = draw(st.integers(min_value=0, max_value=max_half_size))
    big_l = draw(st.integers(min_value=0, max_value=min(2 * n, 6)))
    master_seed = draw(st.integers(min_value=0, max_value=2**32))
    config = EnsembleConfig(half_size=n, bandwidth_half=big_l, density=DensitySpec.gaussian(), master_seed=master_seed)
    return sample_band_matrix(config, draw(st.integers(min_value=0, max_value=1000)))


@seed(1)
@settings(max_examples=60, deadline=None)
@given(H=band_matrices())
def test_eigenvalues_match_dense_oracle(H):
    values = eigenvalues_banded(H).eigenvalues
    oracle = np.linalg.eigvalsh(H.to_dense())
    assert np.all(np.diff(values) >= 0)
    assert np.max(np.abs(values - oracle)) <= ORACLE_TOLERANCE * max(1.0, H.norm_bound())


@seed(2)
@settings(max_examples=30, deadline=None)
@given(H=band_matrices(max_half_size=8))
def test_eigenvectors_diagonalise(H):
    decomposition = eigenvalues_banded(H, want_vectors=True)
    V = decomposition.eigenvectors
    np.testing.assert_allclose(V.T @ V, np.eye(H.order), atol=1e-10)
    np.testing.assert_allclose(H.to_dense() @ V, V * decomposition.eigenvalues, atol=1e-10)


@seed(3)
@settings(max_examples=60, deadline=None)
@given(
    H=band_matrices(),
    E=st.floats(min_value=-3.0, max_value=3.0),
    eps=st.floats(min_value=0.05, max_value=2.0),
    data=st.data(),
)
def test_green_entry_matches_dense_inverse(H, E, eps, data):
    j = data.draw(st.integers(min_value=H.index_min, max_value=H.index_max))
    k = data.draw(st.integers(min_value=H.index_min, max_value=H.index_max))
    inverse = np.linalg.inv(H.to_dense() - complex(E, eps) * np.eye(H.order))
    value = green_entry(H, ComplexShift(E, eps), j, k)
    scale = float(np.max(np.abs(inverse[:, H.position(k)])))
    assert abs(value - inverse[H.position(j), H.position(k)]) <= ORACLE_TOLERANCE * max(1.0, scale)


@seed(4)
@settings(max_examples=40, deadline=None)
@given(H=band_matrices(), data=st.data())
def test_schur_block_inverse_matches_dense_inverse(H, data):
    M = H.to_dense() - 1j * np.eye(H.order)
    size = data.draw(st.integers(min_value=1, max_value=H.order))
    P = data.draw(st.permutations(range(H.order)))[:size]
    block = schur_block_inverse(M, P)
    oracle = np.linalg.inv(M)[np.ix_(P, P)]
    assert np.max(np.abs(block - oracle)) <= ORACLE_TOLERANCE * max(1.0, float(np.max(np.abs(oracle))))


def test_resolvent_column_and_trace_agree_with_spectrum(small_ensemble):
    H = sample_band_matrix(small_ensemble, 1)
    z = ComplexShift(0.2, 0.3)
    resolvent = BandedResolvent(H, z)
    inverse = np.linalg.inv(H.to_dense() - z.z * np.eye(H.order))
    np.testing.assert_allclose(resolvent.column(-3), inverse[:, H.position(-3)], atol=1e-12)
    np.testing.assert_allclose(green_column(H, z, 4), inverse[:, H.position(4)], atol=1e-12)
    trace = resolvent_trace(eigenvalues_banded(H).eigenvalues, z.z)
    assert trace == pytest.approx(complex(np.trace(inverse)), abs=1e-10)


def test_diagonal_matrix_resolvent_is_reciprocal():
    H = BandMatrix(np.array([[1.0, -2.0, 0.5]]))
    assert green_entry(H, ComplexShift(0.0, 1.0), -1, -1) == pytest.approx(1.0 / (1.0 - 1j))
    assert green_entry(H, ComplexShift(0.0, 1.0), -1, 0) == 0
    np.testing.assert_array_equal(eigenvalues_banded(H).eigenvalues, [-2.0, 0.5, 1.0])


def test_real_energy_on_the_spectrum_is_near_singular():
    with pytest.raises(NearSingularError):
        green_entry(BandMatrix(np.array([[1.0, 2.0, 3.0]])), ComplexShift(2.0, 0.0), 0, 0)
    with pytest.raises(NearSingularError):
        BandedResolvent(BandMatrix.from_dense([[0.0, 1.0], [1.0, 0.0]], 1), ComplexShift(1.0, 0.0))


def test_negative_eps_is_rejected():
    with pytest.raises(InvalidConfigError):
        ComplexShift(0.0, -0.1)


def test_reduced_matrix_zeroes_row_and_column(small_ensemble):
    H = sample_band_matrix(small_ensemble, 0)
    reduced = reduced_matrix(H, 3).to_dense()
    dense = H.to_dense()
    p = H.position(3)
    assert not reduced[p].any() and not reduced[:, p].any()
    mask = np.ones(H.order, dtype=bool)
    mask[p] = False
    np.testing.assert_array_equal(reduced[np.ix_(mask, mask)], dense[np.ix_(mask, mask)])


def test_schur_rejects_repeated_coordinates():
    with pytest.raises(InvalidConfigError):
        schur_block_inverse(np.eye(3), [0, 0])
    with pytest.raises(InvalidConfigError):
        schur_block_inverse(np.eye(3), [3])


def test_schur_detects_singular_complement():
    with pytest.raises(NearSingularError):
        schur_block_inverse(np.array([[1.0, 1.0], [1.0, 1.0]]), [0])


def _full_resolvent(H, E, eps):
    return BandedResolvent(H, ComplexShift(E, eps)).solve(np.eye(H.order, dtype=complex))


@seed(5)
@settings(max_examples=40, deadline=None)
@given(H=band_matrices(), E=st.floats(min_value=-3.0, max_value=3.0), eps=st.floats(min_value=0.1, max_value=2.0))
def test_resolvent_is_complex_symmetric(H, E, eps):
    G = _full_resolvent(H, E, eps)
    assert np.max(np.abs(G - G.T)) <= ORACLE_TOLERANCE * max(1.0, float(np.max(np.abs(G))))


@seed(6)
@settings(max_examples=40, deadline=None)
@given(
    H=band_matrices(),
    energies=st.tuples(st.floats(min_value=-3.0, max_value=3.0), st.floats(min_value=-3.0, max_value=3.0)),
    widths=st.tuples(st.floats(min_value=0.1, max_value=2.0), st.floats(min_value=0.1, max_value=2.0)),
)
def test_first_resolvent_identity(H, energies, widths):
    G1 = _full_resolvent(H, energies[0], widths[0])
    G2 = _full_resolvent(H, energies[1], widths[1])
    dz = complex(energies[0], widths[0]) - complex(energies[1], widths[1])
    scale = max(1.0, abs(dz) * np.linalg.norm(G1, 2) * np.linalg.norm(G2, 2))
    assert np.max(np.abs((G1 - G2) - dz * (G1 @ G2))) <= 1e-9 * scale
