import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import BSpline

from smoothpatch.errors import InvalidArgumentError
from smoothpatch.univariate import (UnivariateSpace, basis_matrix, build_mixed_1d, check_admissible,
                                    eval_basis, evaluate, representation_matrix, truncate)

spaces = st.builds(lambda p, dr, k: UnivariateSpace(p, max(p - 1 - dr, 0), k),
                   st.integers(1, 6), st.integers(0, 3), st.integers(0, 7))


def scipy_design(space, x, d=0):
    """Basis values from scipy, one coefficient vector per basis function."""
    out = np.empty((len(x), space.n))
    for i in range(space.n):
        c = np.zeros(space.n)
        c[i] = 1.0
        out[:, i] = BSpline(space.knots, c, space.p, extrapolate=False).derivative(d)(x) if d else \
            BSpline(space.knots, c, space.p, extrapolate=False)(x)
    return out


def test_dimension_counts():
    assert UnivariateSpace(3, 1, 4).n == 3 + 1 + 4 * 2
    assert UnivariateSpace(2, 1, 0).n == 3
    with pytest.raises(InvalidArgumentError):
        UnivariateSpace(2, 2, 3)


@settings(max_examples=40, deadline=None)
@given(space=spaces, d=st.integers(0, 3))
def test_basis_matches_scipy(space, d):
    x = np.linspace(0.0, 1.0 - 1e-9, 37)
    d = min(d, space.r)
    ours = basis_matrix(space, x, d).toarray()
    assert np.allclose(ours, scipy_design(space, x, d), atol=1e-9 * (space.p * (space.k + 1)) ** d)


@settings(max_examples=30, deadline=None)
@given(space=spaces)
def test_partition_of_unity_and_nonnegativity(space):
    x = np.linspace(0, 1, 51)
    B = basis_matrix(space, x).toarray()
    assert np.abs(B.sum(axis=1) - 1).max() < 1e-13
    assert B.min() >= -1e-15


def test_right_endpoint_closed():
    space = UnivariateSpace(3, 2, 2)
    assert eval_basis(space, 0, 1.0)[-1] == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        eval_basis(space, 0, 1.5)


@settings(max_examples=25, deadline=None)
@given(p1=st.integers(1, 4), extra=st.integers(0, 3), k=st.integers(0, 5))
def test_representation_matrix_against_scipy(p1, extra, k):
    coarse = UnivariateSpace(p1, p1 - 1, k)
    p2 = p1 + extra
    fine = UnivariateSpace(p2, max(0, min(p1 - 1, p2 - 2)), k)
    mu = representation_matrix(coarse, fine).mu
    x = np.linspace(0, 1 - 1e-12, 4 * (k + 1) * (p2 + 1))
    assert np.allclose(scipy_design(fine, x) @ mu, scipy_design(coarse, x), atol=1e-12)
    # fine coefficients of the constant one are all ones
    assert np.allclose(mu.sum(axis=1), 1.0)


def test_representation_requires_nesting():
    with pytest.raises(InvalidArgumentError):
        representation_matrix(UnivariateSpace(3, 2, 2), UnivariateSpace(2, 1, 2))


def test_admissibility():
    check_admissible(1, 2, 2)
    for bad in [(1, 1, 4), (1, 4, 4), (2, 3, 1), (0, 1, 3)]:
        with pytest.raises(InvalidArgumentError):
            check_admissible(*bad)


@pytest.mark.parametrize("s,p1,k", [(1, 2, 2), (1, 3, 4), (2, 3, 3), (2, 5, 5)])
def test_truncated_functions_flat_at_ends(s, p1, k):
    m = build_mixed_1d(s, p1, k)
    for i in m.groups["S1bar"]:
        t = truncate(m.coarse, m.fine, s, i)
        for d in range(s + 1):
            ends = evaluate(m.fine, t.coefficients, np.array([0.0, 1.0]), d)
            assert np.abs(ends).max() < 1e-10


@pytest.mark.parametrize("s,p1,k", [(1, 2, 2), (1, 3, 4), (2, 4, 3), (2, 5, 5)])
def test_mixed_1d_sizes(s, p1, k):
    m = build_mixed_1d(s, p1, k)
    n1, n2 = m.coarse.n, m.fine.n
    assert m.sizes == (n1 - 2 * (s + 1), 2 * s, 2 * (s + 1))
    assert m.fine.n == n2 == 2 * s + 2 + k * (s + 1)
    assert np.linalg.matrix_rank(m.coefficients) == m.dim
