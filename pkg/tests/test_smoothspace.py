import numpy as np
import pytest
import scipy.linalg
from numpy.polynomial import Polynomial

from smoothpatch.checks import (independence_suite, perturbed_gluing, physical_jumps,
                                smoothness_suite)
from smoothpatch.errors import InconsistentTraceError, InvalidArgumentError
from smoothpatch.geometry import builtin_domain, view_cross_rows
from smoothpatch.smoothspace import (assemble_smooth_space, coeffs_from_cross_derivatives,
                                     project_trace, spline_multiply, trace_space)
from smoothpatch.traces import trace_values
from smoothpatch.univariate import UnivariateSpace, basis_matrix, evaluate


def brute_force_dimension(domain, s, p1, k):
    """Dimension of {mixed splines per patch with equal edge traces f_l that lie in
    the trace spaces}, from a normalized constraint matrix's singular value gap."""
    space = assemble_smooth_space(domain, s, p1, k)
    M = space.mixed.coefficient_matrix.toarray()
    P, d = len(domain.patches), M.shape[1]
    v = np.linspace(0, 1, 24 * (k + 1) + 1)
    extra = [(e.index, ell) for e in domain.inner_edges for ell in range(s + 1)]
    sizes = [trace_space(s, k, ell).n for _, ell in extra]
    off = np.concatenate([[P * d], P * d + np.cumsum(sizes)])
    rows = []
    for e in domain.inner_edges:
        g = domain.gluing(e)
        for tau, view in enumerate(e.views):
            cross = [[c @ M for c in r] for r in view_cross_rows(space.fine, view, v, s)]
            for ell, t in enumerate(trace_values(cross, g.alpha[tau], g.beta[tau], v, s)):
                R = np.zeros((len(v), off[-1]))
                R[:, view.patch * d:(view.patch + 1) * d] = t
                i = extra.index((e.index, ell))
                R[:, off[i]:off[i + 1]] = -basis_matrix(trace_space(s, k, ell), v).toarray()
                rows.append(R)
    C = np.vstack(rows)
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    sv = scipy.linalg.svdvals(C)
    logs = np.log10(sv / sv[0] + 1e-300)
    logs = logs[logs > -20]
    gap = int(np.argmax(-np.diff(logs)))
    assert logs[gap] - logs[gap + 1] > 8, "no clear rank gap"
    return off[-1] - (gap + 1), space


@pytest.mark.parametrize("name,s,p1,k", [
    ("three-patch", 1, 2, 4), ("three-patch", 2, 3, 4), ("g2-three-patch", 1, 2, 4),
    ("five-patch", 2, 5, 5)])
def test_dimension_matches_brute_force(name, s, p1, k):
    expected, space = brute_force_dimension(builtin_domain(name), s, p1, k)
    assert space.dim == expected


def test_block_counts_three_patch():
    space = assemble_smooth_space(builtin_domain("three-patch"), 1, 2, 4)
    assert space.block_sizes() == {"patch": 75, "edge": 99, "vertex": 45}
    inner = [v for v in space.info["vertex_kernels"].values() if v["kind"] == "inner"]
    assert inner[0]["kernel"] == 6


@pytest.mark.parametrize("name,s,p1,k", [
    ("three-patch", 1, 2, 4), ("five-patch", 2, 3, 4), ("g2-three-patch", 1, 3, 5)])
def test_smooth_and_independent(name, s, p1, k):
    space = assemble_smooth_space(builtin_domain(name), s, p1, k)
    assert smoothness_suite(space).passed
    assert independence_suite(space).passed


@pytest.mark.parametrize("name,s,p1,k", [("three-patch", 1, 3, 4), ("five-patch", 2, 4, 4)])
def test_functions_lie_in_mixed_space(name, s, p1, k):
    space = assemble_smooth_space(builtin_domain(name), s, p1, k)
    M = space.mixed.coefficient_matrix.toarray()
    Q, _ = np.linalg.qr(M)
    for T in space.patch_matrices:
        T = T.toarray()
        assert np.abs(T - Q @ (Q.T @ T)).max() <= 1e-10 * np.abs(T).max()


@pytest.mark.parametrize("s,p1,k", [(1, 2, 4), (2, 5, 5)])
def test_homogeneous_functions_vanish_on_boundary(s, p1, k):
    d = builtin_domain("five-patch")
    space = assemble_smooth_space(d, s, p1, k)
    hom = space.homogeneous_indices()
    assert 0 < len(hom) < space.dim
    v = np.linspace(0, 1, 23)
    for e in d.boundary_edges:
        view = e.views[0]
        T = space.patch_matrices[view.patch][:, hom]
        scale = np.abs(T.toarray()).max()
        for m, row in enumerate(view_cross_rows(space.fine, view, v, s)):
            vals = row[0] @ T
            vals = vals.toarray() if hasattr(vals, "toarray") else vals
            assert np.abs(vals).max() <= 1e-10 * scale * (k + 1) ** m


def test_perturbed_gluing_breaks_smoothness_on_that_edge():
    d = builtin_domain("three-patch")
    edge = d.inner_edges[1].index
    space = assemble_smooth_space(d, 1, 2, 4, gluing=perturbed_gluing(d, edge))
    jumps = physical_jumps(space)
    assert max(jumps, key=jumps.get) == edge
    result = smoothness_suite(space)
    assert not result.passed and f"edge {edge}" in result.detail


def test_k_below_2s_rejected():
    with pytest.raises(InvalidArgumentError, match="2s"):
        assemble_smooth_space(builtin_domain("three-patch"), 2, 3, 3)


def test_spline_multiply_pointwise():
    space = UnivariateSpace(3, 1, 4)
    c = np.random.default_rng(2).standard_normal(space.n)
    poly = Polynomial([0.5, -2.0, 1.5])
    out = spline_multiply(space, c, poly)
    x = np.linspace(0, 1, 101)
    target = UnivariateSpace(5, 1, 4)
    assert np.allclose(evaluate(target, out, x), evaluate(space, c, x) * poly(x), atol=1e-12)
    with pytest.raises(InvalidArgumentError):
        spline_multiply(space, c, poly, target=UnivariateSpace(4, 1, 4))


def test_coeffs_from_cross_derivatives_roundtrip():
    s = 2
    fine = UnivariateSpace(2 * s + 1, s, 3)
    rng = np.random.default_rng(4)
    rows = rng.standard_normal((s + 1, fine.n))
    # g_m = sum_j N_j^{(m)}(0) * row_j
    D = np.array([[basis_matrix(fine, [0.0], m)[0, j] for j in range(s + 1)] for m in range(s + 1)])
    assert np.allclose(coeffs_from_cross_derivatives(fine, s, D @ rows), rows)


def test_project_trace_rejects_non_members():
    fine = UnivariateSpace(3, 1, 2)
    assert np.allclose(evaluate(fine, project_trace(fine, lambda x: x ** 3), np.array([0.3])), 0.027)
    with pytest.raises(InconsistentTraceError):
        project_trace(fine, np.sin)
