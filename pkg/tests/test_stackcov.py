import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from misoeiv.datasim import Dataset
from misoeiv.stackcov import (SingularScalingError, direct_sum, inv_sqrt_sym, sample_covariance,
                              stack_lagged)

# pseudo-output error covariance printed for the channel-1 step (R (+) 0.9596 I)
PRINTED_SIGMA = np.array([
    [2.3384, 1.1957, 1.0839, 0, 0, 0],
    [1.1957, 2.3384, 1.1957, 0, 0, 0],
    [1.0839, 1.1957, 2.3384, 0, 0, 0],
    [0, 0, 0, 0.9596, 0, 0],
    [0, 0, 0, 0, 0.9596, 0],
    [0, 0, 0, 0, 0, 0.9596],
])


def test_stack_by_definition():
    d = Dataset(np.array([1.0, 2, 3]), np.array([[4.0, 5, 6]]))
    Z = stack_lagged(d, 1)
    np.testing.assert_array_equal(Z.Z, [[2, 3], [1, 2], [5, 6], [4, 5]])
    assert Z.var_layout == ("y", "u1")


def test_stack_lag_zero():
    X = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(stack_lagged(X, 0).Z, X)


def test_siso_stack_row_count(noisy_siso):
    assert stack_lagged(noisy_siso, 3).Z.shape[0] == 8


def test_stack_lag_too_large():
    with pytest.raises(ValueError):
        stack_lagged(np.zeros((2, 5)), 5)


def test_covariance_examples():
    np.testing.assert_array_equal(sample_covariance(np.array([[1.0, -1, 1, -1]])).S, [[1.0]])
    np.testing.assert_array_equal(sample_covariance(np.eye(2)).S, 0.5 * np.eye(2))


def test_covariance_zero_columns():
    with pytest.raises(ValueError):
        sample_covariance(np.zeros((2, 0)))


def test_covariance_warns_when_rank_deficient():
    with pytest.warns(UserWarning, match="rank deficient"):
        sample_covariance(np.ones((4, 2)))


def test_inv_sqrt_examples():
    np.testing.assert_allclose(inv_sqrt_sym(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(inv_sqrt_sym(np.diag([4.0, 0.25])), np.diag([0.5, 2.0]), atol=1e-15)


def test_inv_sqrt_printed_matrix():
    W = inv_sqrt_sym(PRINTED_SIGMA)
    np.testing.assert_allclose(W, W.T, atol=0)
    np.testing.assert_allclose(W @ PRINTED_SIGMA @ W, np.eye(6), atol=1e-8)


def test_inv_sqrt_singular():
    with pytest.raises(SingularScalingError, match="singular scaling matrix: eigenvalue #0"):
        inv_sqrt_sym(np.diag([0.0, 1.0]))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), logc=st.floats(0, 6), seed=st.integers(0, 2**31))
def test_inv_sqrt_product_identity(n, logc, seed):
    Q = ortho_group.rvs(n, random_state=seed) if n > 1 else np.ones((1, 1))
    lam = np.logspace(0, logc, n)
    S = (Q * lam) @ Q.T
    W = inv_sqrt_sym(S)
    np.testing.assert_allclose(W @ S @ W, np.eye(n), atol=1e-8)


def test_direct_sum_layout():
    a, b, c, d, e, f, g, h = range(1, 9)
    out = direct_sum([[[a, b], [c, d]], [[e, f], [g, h]]])
    np.testing.assert_array_equal(out, [[a, b, 0, 0], [c, d, 0, 0], [0, 0, e, f], [0, 0, g, h]])


def test_direct_sum_with_empty():
    A = np.array([[1.0, 2], [3, 4]])
    np.testing.assert_array_equal(direct_sum([A, np.zeros((0, 0))]), A)


def test_direct_sum_scaled_identities():
    out = direct_sum([2.5 * np.eye(3), 0.5 * np.eye(3)])
    np.testing.assert_array_equal(out, np.diag([2.5] * 3 + [0.5] * 3))


def test_direct_sum_nonsquare():
    with pytest.raises(ValueError):
        direct_sum([np.zeros((2, 3))])


@settings(max_examples=30, deadline=None)
@given(n1=st.integers(1, 5), n2=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_direct_sum_eigenvalue_union(n1, n2, seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(n1, n1))
    B = r.normal(size=(n2, n2))
    A, B = A + A.T, B + B.T
    got = np.linalg.eigvalsh(direct_sum([A, B]))
    want = np.sort(np.r_[np.linalg.eigvalsh(A), np.linalg.eigvalsh(B)])
    np.testing.assert_allclose(got, want, atol=1e-10)


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_rank_deficiency_counts_relations(clean_miso, L):
    # overall difference equation has order 2, so L - 2 + 1 shifted copies lie in the null space
    S = sample_covariance(stack_lagged(clean_miso, L)).S
    lam = np.linalg.eigvalsh(S)
    assert np.sum(lam < 1e-8 * np.trace(S)) >= L - 2 + 1
