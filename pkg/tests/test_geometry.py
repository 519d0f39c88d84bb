import json
from fractions import Fraction

import numpy as np
import pytest

from smoothpatch.checks import lambda_suite
from smoothpatch.errors import DegenerateGeometryError, InvalidArgumentError
from smoothpatch.geometry import (BUILTIN_NAMES, approximate_geometry, bilinear_patch,
                                  build_topology, builtin_domain, contained_in, domain_from_json,
                                  domain_to_json, edge_determinants, lambda_closed_form,
                                  lambda_objective, load_domain, view_geometry)


@pytest.mark.parametrize("name,patches,inner,boundary", [
    ("three-patch", 3, 3, 6), ("five-patch", 5, 5, 10), ("g2-three-patch", 3, 3, 6), ("square", 1, 0, 4)])
def test_builtin_topology(name, patches, inner, boundary):
    d = builtin_domain(name)
    assert (len(d.patches), len(d.inner_edges), len(d.boundary_edges)) == (patches, inner, boundary)
    inner_vertices = [v for v in d.vertices if v.kind == "inner"]
    assert len(inner_vertices) == (1 if inner else 0)
    if inner:
        assert len(inner_vertices[0].patches) == patches


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_both_sides_trace_the_same_curve(name):
    d = builtin_domain(name)
    v = np.linspace(0, 1, 17)
    for e in d.inner_edges:
        a, b = (view_geometry(d.patches[w.patch], w, np.zeros_like(v), v, 0)[0, 0] for w in e.views)
        assert np.abs(a - b).max() < 1e-12


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_gluing_alpha_signs_and_relation(name):
    d = builtin_domain(name)
    v = np.linspace(0, 1, 11)
    for e in d.inner_edges:
        g = d.gluing(e)
        assert np.all(g.alpha[0](v) < 0) and np.all(g.alpha[1](v) > 0)
        dets, betas = edge_determinants(e, d, v)
        for tau in range(2):
            assert np.allclose(g.alpha[tau](v), g.lam * dets[tau])
            assert np.allclose(g.beta[tau](v), betas[tau])


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_lambda_closed_form_minimizes(name):
    assert lambda_suite(builtin_domain(name)).passed


def test_lambda_objective_is_minimal_at_closed_form():
    from numpy.polynomial import Polynomial
    d0, d1 = Polynomial([-1.3, 0.4]), Polynomial([0.9, 0.2])
    lam = lambda_closed_form(d0, d1)
    best = lambda_objective(lam, d0, d1)
    for delta in (1e-3, -1e-3, 0.1):
        assert lambda_objective(lam + delta, d0, d1) > best


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_json_roundtrip(name, tmp_path):
    d = builtin_domain(name)
    path = tmp_path / "d.json"
    path.write_text(json.dumps(domain_to_json(d)))
    e = load_domain(str(path))
    assert e.name == name
    for p, q in zip(d.patches, e.patches):
        assert p.degree == q.degree and np.array_equal(p.net, q.net)


def test_json_accepts_fraction_strings():
    data = {"name": "unit", "patches": [{"degree": 1, "regularity": 0, "h0": "1",
                                         "net": [["0", "0"], ["0", "1"], ["1", "0"], ["1", "1"]]}]}
    d = domain_from_json(data)
    assert len(d.patches) == 1 and len(d.boundary_edges) == 4


def test_bad_domain_inputs():
    with pytest.raises(InvalidArgumentError):
        load_domain("no-such-domain")
    with pytest.raises(InvalidArgumentError):
        domain_from_json({"patches": [{"degree": 1, "regularity": 0, "net": [[0, 0]] * 3}]})


def test_degenerate_patch_rejected():
    # bow-tie: the Jacobian changes sign
    with pytest.raises(DegenerateGeometryError):
        build_topology([bilinear_patch((0, 0), (1, 0), (1, 1), (0, 1))])


def test_g2_domain_containment():
    d = builtin_domain("g2-three-patch")
    assert all(contained_in(p, 3, 2, Fraction(1, 4)) for p in d.patches)
    assert all(contained_in(p, 5, 2, Fraction(1, 8)) for p in d.patches)
    assert not any(contained_in(p, 5, 4, Fraction(1, 4)) for p in d.patches)
    assert not any(contained_in(p, 2, 1, Fraction(1, 6)) for p in d.patches)


@pytest.mark.parametrize("degree,h0,s", [(2, Fraction(1, 6), 1), (3, Fraction(1, 5), 2)])
def test_approximation_keeps_interfaces(degree, h0, s):
    src = builtin_domain("g2-three-patch")
    d = approximate_geometry(src, degree, degree - 1, h0, smoothness=s)
    assert all(contained_in(p, degree, degree - 1, h0) for p in d.patches)
    pts = np.concatenate([p.net.reshape(-1, 2) for p in src.patches])
    assert d.info["fit_residual"] < 1e-2 * np.ptp(pts, axis=0).max()
    v = np.linspace(0, 1, 17)
    for e in d.inner_edges:
        a, b = (view_geometry(d.patches[w.patch], w, np.zeros_like(v), v, 0)[0, 0] for w in e.views)
        assert np.abs(a - b).max() < 1e-10
        d.gluing(e)  # linear gluing data exists
    # corners are interpolated
    for p, q in zip(src.patches, d.patches):
        for c in ((0, 0), (1, 0), (0, 1), (1, 1)):
            assert np.allclose(p.evaluate([c[0]], [c[1]]), q.evaluate([c[0]], [c[1]]))


def test_exact_embedding_when_contained():
    src = builtin_domain("g2-three-patch")
    d = approximate_geometry(src, 3, 2, Fraction(1, 8))
    assert d.info.get("exact")
    x = np.random.default_rng(0).random(20)
    for p, q in zip(src.patches, d.patches):
        assert np.allclose(p.evaluate(x, x[::-1]), q.evaluate(x, x[::-1]), atol=1e-13)
