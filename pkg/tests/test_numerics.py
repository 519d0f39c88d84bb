import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from smoothpatch.errors import InvalidArgumentError, SingularSystemError
from smoothpatch.numerics import (composite_gauss, gauss_legendre, nullspace, solve_spd,
                                  spectral_gap, symmetrize, weighted_lstsq)


@given(n=st.integers(1, 8), coef=st.lists(st.floats(-5, 5), min_size=1, max_size=16))
def test_gauss_integrates_polynomials_of_degree_2n_minus_1(n, coef):
    coef = np.array(coef[: 2 * n])
    poly = np.polynomial.Polynomial(coef)
    exact = poly.integ()(2.0) - poly.integ()(-0.5)
    got = gauss_legendre(n, -0.5, 2.0).integrate(poly)
    assert got == pytest.approx(exact, abs=1e-11 * (1 + np.abs(coef).sum()))


def test_composite_gauss_covers_breaks():
    rule = composite_gauss(np.linspace(0, 1, 5), 3)
    assert rule.nodes.shape == (12,)
    assert rule.weights.sum() == pytest.approx(1.0)
    assert rule.integrate(lambda x: np.abs(x - 0.5) ** 5) == pytest.approx(2 * 0.5 ** 6 / 6)


def test_gauss_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        gauss_legendre(0)
    with pytest.raises(InvalidArgumentError):
        gauss_legendre(3, 1.0, 1.0)


def test_nullspace_of_rank_deficient_matrix():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 6))
    K = nullspace(A)
    assert K.shape == (6, 4)
    assert np.abs(A @ K).max() < 1e-12
    assert np.allclose(K.T @ K, np.eye(4))
    assert nullspace(np.zeros((3, 5))).shape == (5, 5)


def test_spectral_gap_detects_separation():
    M = np.diag([1.0, 0.5, 1e-14])
    assert spectral_gap(M) > 1e12
    assert spectral_gap(np.eye(3)) == np.inf


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 10_000))
def test_solve_spd_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    B = sp.random(n, n, density=0.3, random_state=seed) + sp.eye(n)
    S = (B @ B.T).tocsr() * rng.uniform(1e-3, 1e3)
    b = rng.standard_normal(n)
    x = solve_spd(S, b)
    assert np.allclose(S @ x, b, atol=1e-9 * np.abs(b).max() * max(1.0, np.linalg.cond(S.toarray()) * 1e-6))
    X = solve_spd(S, np.column_stack([b, 2 * b]))
    assert np.allclose(X[:, 1], 2 * x)


def test_solve_spd_reports_offending_unknown():
    S = sp.identity(6, format="lil")
    S[3, 4] = S[4, 3] = 2.0
    with pytest.raises(SingularSystemError) as exc:
        solve_spd(S.tocsc(), np.ones(6))
    assert exc.value.index in (3, 4)
    S = sp.diags([1.0, -1.0, 1.0])
    with pytest.raises(SingularSystemError, match="unknown 1"):
        solve_spd(S, np.ones(3))


def test_weighted_lstsq_normal_equations():
    rng = np.random.default_rng(3)
    A, b, w = rng.standard_normal((20, 4)), rng.standard_normal(20), rng.uniform(0.1, 3, 20)
    x = weighted_lstsq(A, b, w)
    W = np.diag(w)
    assert np.allclose(A.T @ W @ A @ x, A.T @ W @ b)
    with pytest.raises(InvalidArgumentError):
        weighted_lstsq(A, b, -w)


def test_symmetrize_is_exact():
    S = sp.csr_matrix(np.array([[1.0, 2.0], [2.0 + 1e-16, 3.0]]))
    T = symmetrize(S)
    assert (T != T.T).nnz == 0
