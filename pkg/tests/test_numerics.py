import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import expm_series, power_iteration_radius, simpson_zoh
from uavsec import numerics
from uavsec.errors import DetectabilityError, DimensionError, DomainError


def test_expm_zero_and_diagonal():
    assert np.allclose(numerics.matrix_exponential(np.zeros((3, 3))), np.eye(3), rtol=0, atol=1e-15)
    d = np.array([-1.0, 0.5, 2.0])
    assert np.allclose(numerics.matrix_exponential(np.diag(d)), np.diag(np.exp(d)), rtol=1e-14)


def test_expm_nilpotent_and_scaling():
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(numerics.matrix_exponential(N, 3.0), [[1.0, 3.0], [0.0, 1.0]], atol=1e-15)
    # large norm exercises squaring
    A = np.array([[-40.0, 30.0], [0.0, -35.0]])
    assert np.allclose(numerics.matrix_exponential(A), scipy.linalg.expm(A), rtol=1e-10, atol=1e-300)


def test_expm_rejects_bad_input():
    with pytest.raises(DimensionError):
        numerics.matrix_exponential(np.ones((2, 3)))
    with pytest.raises(DomainError):
        numerics.matrix_exponential(np.array([[np.nan]]))


def test_expm_matches_series_on_random_stable():
    rng = np.random.default_rng(11)
    for _ in range(20):
        A = rng.standard_normal((6, 6)) / 3 - np.eye(6)
        ref = expm_series(A)
        assert np.linalg.norm(numerics.matrix_exponential(A) - ref) <= 1e-12 * np.linalg.norm(ref)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.1, 2.0))
def test_expm_semigroup(s, t):
    A = np.array([[0.0, 1.0, 0.0], [-2.0, -1.0, 0.5], [0.0, 0.3, -0.7]])
    lhs = numerics.matrix_exponential(A, s + t)
    rhs = numerics.matrix_exponential(A, s) @ numerics.matrix_exponential(A, t)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-13)


def test_zoh_scalar_closed_form():
    a, Ts = -0.7, 0.05
    Ad, Bd = numerics.zoh_discretize([[a]], [[1.0]], Ts)
    assert Ad[0, 0] == pytest.approx(np.exp(a * Ts), rel=1e-14)
    assert Bd[0, 0] == pytest.approx((np.exp(a * Ts) - 1) / a, rel=1e-12)


def test_zoh_double_integrator_singular_A():
    Ad, Bd = numerics.zoh_discretize([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], 0.1)
    assert np.allclose(Ad, [[1.0, 0.1], [0.0, 1.0]])
    assert np.allclose(Bd, [[0.005], [0.1]])


def test_zoh_matches_simpson():
    rng = np.random.default_rng(5)
    for _ in range(5):
        A = rng.standard_normal((6, 6)) - 2 * np.eye(6)
        B = rng.standard_normal((6, 2))
        _, Bd = numerics.zoh_discretize(A, B, 0.02)
        assert np.max(np.abs(Bd - simpson_zoh(A, B, 0.02))) <= 1e-12


def test_zoh_errors():
    with pytest.raises(DomainError):
        numerics.zoh_discretize(np.eye(2), np.ones((2, 1)), 0.0)
    with pytest.raises(DimensionError):
        numerics.zoh_discretize(np.eye(2), np.ones((3, 1)), 0.1)


def test_null_space_examples():
    assert numerics.null_space(np.eye(3)) == []
    basis = numerics.null_space(np.array([[1.0, 1.0]]))
    assert len(basis) == 1 and np.allclose(np.abs(basis[0]), [2**-0.5, 2**-0.5])
    assert len(numerics.null_space(np.zeros((2, 3)))) == 3


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_null_space_vectors_are_null_and_orthonormal(rows, cols, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((rows, cols))
    basis = numerics.null_space(M)
    assert len(basis) == cols - np.linalg.matrix_rank(M)
    if basis:
        V = np.array(basis)
        assert np.allclose(V @ V.T, np.eye(len(basis)), atol=1e-12)
        assert np.max(np.abs(M @ V.T)) <= 1e-10


def test_spectral_radius_vs_power_iteration():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((8, 8))
    M = M @ M.T / 10
    assert numerics.spectral_radius(M) == pytest.approx(power_iteration_radius(M), rel=1e-6)


def test_stabilizing_gain_double_integrator():
    Ad, _ = numerics.zoh_discretize([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], 0.02)
    H = numerics.stabilizing_gain(Ad, [[1.0, 0.0]])
    assert numerics.spectral_radius(Ad - H @ np.array([[1.0, 0.0]])) < 1.0


def test_stabilizing_gain_undetectable_raises():
    # unstable, unmeasured second state
    Ad = np.diag([0.5, 1.2])
    with pytest.raises(DetectabilityError) as err:
        numerics.stabilizing_gain(Ad, [[1.0, 0.0]], mode=3)
    assert err.value.mode == 3
    assert "mode 3" in str(err.value)


def test_observability_rank():
    Ad = np.array([[1.0, 0.02], [0.0, 1.0]])
    assert numerics.observability_rank(Ad, [[1.0, 0.0]]) == 2
    assert numerics.observability_rank(Ad, [[0.0, 1.0]]) == 1
