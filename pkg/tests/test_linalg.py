import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from app.exceptions import ModelValidationError, NumericalError
from app.utils.linalg import (
    MatrixPowers,
    as_matrix,
    eig_decompose,
    mat_power,
    psd_factor,
    pseudo_inverse,
    real_scalar,
    transform_covariance,
)
from tests.conftest import PLATOON_A, PLATOON_B


def test_mat_power_of_shear():
    """Squaring the platoon matrix doubles the coupling term."""
    result = mat_power(np.array(PLATOON_A), 2)
    assert np.array_equal(result, [[1, 2, 0], [0, 1, 0], [0, 0, 1]])


def test_mat_power_zero_is_identity():
    assert np.array_equal(mat_power(np.array(PLATOON_A), 0), np.eye(3))


def test_mat_power_rejects_non_square():
    with pytest.raises(ModelValidationError):
        mat_power(np.ones((2, 3)), 2)


def test_matrix_powers_cache_matches_direct_power():
    A = np.array([[0.9, 0.2], [-0.1, 0.7]])
    cache = MatrixPowers(A, 10)
    for k in (0, 1, 5, 10, 13):
        assert np.allclose(cache.power(k), np.linalg.matrix_power(A, k), rtol=1e-12, atol=1e-14)
    assert cache.max_power == 10
    with pytest.raises(ValueError):
        cache.stacked[0, 0, 0] = 2.0


def test_pseudo_inverse_of_platoon_input():
    pinv = pseudo_inverse(np.array(PLATOON_B))
    assert np.allclose(pinv.matrix, [[1.0, 1.0, 0.0]])
    assert pinv.rank == 1


def test_pseudo_inverse_full_rank_is_inverse():
    B = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(pseudo_inverse(B).matrix @ B, np.eye(2))


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=5), st.integers(min_value=1, max_value=5), st.integers(0, 2 ** 31))
def test_pseudo_inverse_penrose_conditions(rows, cols, seed):
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(1, min(rows, cols) + 1))
    # U @ V with orthonormal U and well-scaled V has exact rank `rank`
    U, _ = np.linalg.qr(rng.normal(size=(rows, rank)))
    V = np.diag(rng.uniform(0.5, 2.0, size=rank)) @ np.linalg.qr(rng.normal(size=(cols, rank)))[0].T
    B = U @ V
    result = pseudo_inverse(B)
    X = result.matrix
    assert result.rank == rank
    assert np.allclose(B @ X @ B, B, atol=1e-9)
    assert np.allclose(X @ B @ X, X, atol=1e-9)
    assert np.allclose((B @ X).T, B @ X, atol=1e-9)
    assert np.allclose((X @ B).T, X @ B, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=1, max_value=5),
    st.integers(min_value=0, max_value=10),
    st.integers(min_value=0, max_value=10),
    st.integers(0, 2 ** 31),
)
def test_mat_power_adds_exponents(n, j, k, seed):
    A = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, n))
    combined = mat_power(A, j + k)
    product = mat_power(A, j) @ mat_power(A, k)
    # rounding in either product is bounded relative to powers of |A|
    scale = max(1.0, float(mat_power(np.abs(A), j + k).max()))
    assert np.allclose(combined, product, rtol=1e-9, atol=1e-9 * scale)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=20), st.integers(0, 2 ** 31))
def test_eigenbasis_reproduces_matrix_powers(n, k, seed):
    A = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, n))
    decomposition = eig_decompose(A)
    assume(decomposition.diagonalizable)
    P = decomposition.P
    rebuilt = P @ np.diag(decomposition.eigenvalues ** k) @ np.linalg.inv(P)
    radius = max(1.0, float(np.abs(decomposition.eigenvalues).max()))
    tolerance = 1e-12 * (decomposition.condition * radius ** k * (k + 1) + float(mat_power(np.abs(A), k).max()))
    assert np.allclose(rebuilt.imag, 0.0, atol=tolerance)
    assert np.allclose(rebuilt.real, mat_power(A, k), atol=tolerance)


def test_platoon_matrix_is_not_diagonalizable():
    assert eig_decompose(np.array(PLATOON_A)).diagonalizable is False


def test_identity_is_diagonalizable():
    decomposition = eig_decompose(np.eye(3))
    assert decomposition.diagonalizable
    assert np.allclose(decomposition.P @ decomposition.Lambda @ np.linalg.inv(decomposition.P), np.eye(3))


def test_rotation_has_complex_eigenbasis():
    decomposition = eig_decompose(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert decomposition.diagonalizable
    assert np.allclose(np.sort_complex(decomposition.eigenvalues), [-1j, 1j])


def test_psd_factor_reproduces_rank_deficient_covariance():
    sigma = np.diag([0.0, 4.0, 0.0])
    factor = psd_factor(sigma)
    assert np.allclose(factor @ factor.T, sigma)


def test_psd_factor_rejects_indefinite_matrix():
    with pytest.raises(NumericalError):
        psd_factor(np.array([[1.0, 0.0], [0.0, -0.5]]))


def test_psd_factor_rejects_asymmetric_matrix():
    with pytest.raises(NumericalError):
        psd_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_transform_covariance_rejects_singular_basis():
    with pytest.raises(NumericalError):
        transform_covariance(np.array([[1.0, 1.0], [1.0, 1.0]]), np.eye(2))


def test_real_scalar_drops_tiny_residue_and_refuses_large_one():
    assert real_scalar(2.0 + 1e-14j) == 2.0
    with pytest.raises(NumericalError):
        real_scalar(2.0 + 1e-3j)


def test_as_matrix_rejects_non_finite_entries():
    with pytest.raises(ModelValidationError):
        as_matrix([[1.0, float("nan")]], "A")


def test_transform_covariance_rescales_by_basis():
    transformed = transform_covariance(np.diag([2.0, 1.0]), np.eye(2))
    assert np.allclose(transformed, np.diag([0.25, 1.0]))


def test_transform_covariance_of_zero_noise_is_zero():
    P = np.array([[1.0, 2.0], [0.5, 3.0]])
    assert np.array_equal(transform_covariance(P, np.zeros((2, 2))), np.zeros((2, 2)))
