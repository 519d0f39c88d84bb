from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from smoothpatch import (BoundaryData, ExactField, SolverConfig, assemble_smooth_space,
                         builtin_domain, compute_errors, convergence_study, solve_pde)
from smoothpatch.checks import pullback_suite
from smoothpatch.errors import AssemblyError, InvalidArgumentError, UndefinedNormError
from smoothpatch.galerkin import (ConvergenceReport, LevelResult, assemble_stiffness,
                                  fit_boundary, fit_objective, homogeneous_dofs, thread_count)
from smoothpatch.pullback import (GRAD_LAPLACIAN, LAPLACIAN, divergence_form, physical_map)

xi, eta = sympy.symbols("xi eta")


def symbolic_case(c):
    """A smooth nonlinear map near the identity and u = cos(x) sin(y) pulled back."""
    F = (xi + c[0] * xi * eta + c[1] * eta ** 2, eta + c[2] * xi ** 2 + c[3] * xi * eta ** 2)
    X, Y = sympy.symbols("x y")
    u = sympy.cos(X) * sympy.sin(Y)
    uhat = u.subs({X: F[0], Y: F[1]})
    lap = sympy.diff(u, X, 2) + sympy.diff(u, Y, 2)
    glap = [sympy.diff(lap, X), sympy.diff(lap, Y)]
    return F, uhat, [e.subs({X: F[0], Y: F[1]}) for e in [lap] + glap]


def derivative_table(expr, pts, order, component=None):
    out = {}
    for a in range(order + 1):
        for b in range(order + 1 - a):
            f = sympy.lambdify((xi, eta), sympy.diff(expr, xi, a, eta, b) if a + b else expr)
            out[a, b] = np.broadcast_to(np.asarray(f(pts[:, 0], pts[:, 1]), float), pts[:, 0].shape).copy()
    return out


@settings(max_examples=8, deadline=None)
@given(c=st.lists(st.floats(-0.3, 0.3), min_size=4, max_size=4), seed=st.integers(0, 99))
def test_chain_rule_against_symbolic(c, seed):
    F, uhat, exact = symbolic_case(c)
    pts = np.random.default_rng(seed).random((6, 2))
    geo0 = derivative_table(F[0], pts, 3)
    geo1 = derivative_table(F[1], pts, 3)
    geo = {k: np.stack([geo0[k], geo1[k]], -1) for k in geo0}
    param = derivative_table(uhat, pts, 3)
    pmap = physical_map(geo, 3)
    want = [sympy.lambdify((xi, eta), e)(pts[:, 0], pts[:, 1]) for e in exact]
    assert np.allclose(pmap.apply(LAPLACIAN, param), want[0], rtol=1e-10, atol=1e-11)
    for i, combo in enumerate(GRAD_LAPLACIAN):
        assert np.allclose(pmap.apply(combo, param), want[1 + i], rtol=1e-10, atol=1e-11)
    lap_div, _ = divergence_form(geo, param, 2)
    assert np.allclose(lap_div, want[0], rtol=1e-10, atol=1e-11)


def test_pullback_forms_agree_on_curved_patches():
    assert pullback_suite().passed


def test_degenerate_jacobian_reported():
    geo = {(0, 0): np.zeros((2, 2)), (1, 0): np.array([[1.0, 0.0]] * 2),
           (0, 1): np.array([[1.0, 0.0]] * 2)}
    with pytest.raises(AssemblyError, match="quadrature point 0"):
        physical_map(geo, 1)


def test_exact_field_sources():
    u = ExactField()
    x, y = np.array([0.3, -1.2]), np.array([0.7, 2.0])
    base = np.cos(x) * np.sin(y)
    assert np.allclose(u.source("biharmonic")(x, y), 4 * base)
    # -Delta^3 u = 8 u for this field
    assert np.allclose(u.source("triharmonic")(x, y), 8 * base)
    assert np.allclose(u.laplacian(x, y), -2 * base)
    with pytest.raises(InvalidArgumentError):
        ExactField("x + z")
    with pytest.raises(InvalidArgumentError):
        u.source("poisson")


def test_solver_config_defaults():
    cfg = SolverConfig(pde="triharmonic")
    assert cfg.fit_weights(0.1) == pytest.approx((1e-2, 1e-4))
    assert SolverConfig(pde="biharmonic", omega=3.0).fit_weights(0.1) == (3.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        SolverConfig(pde="biharmonic", omega=-1.0)
    with pytest.raises(InvalidArgumentError):
        SolverConfig(pde="laplace")


@pytest.fixture(scope="module")
def small_space():
    return assemble_smooth_space(builtin_domain("five-patch"), 1, 2, 4)


def test_stiffness_symmetric_positive_on_homogeneous(small_space):
    K = assemble_stiffness(small_space, SolverConfig())
    assert (K != K.T).nnz == 0
    keep = homogeneous_dofs(small_space)
    eig = np.linalg.eigvalsh(K[keep][:, keep].toarray())
    assert eig.min() > 0


def test_zero_data_gives_zero_solution(small_space):
    sol = solve_pde(small_space, BoundaryData.zero(), SolverConfig())
    assert np.abs(sol.coefficients).max() == 0.0


def test_boundary_fit_exact_for_members(small_space):
    u = ExactField("x**2 - 3*x*y + y")
    data = BoundaryData.from_exact(u, "biharmonic")
    cfg = SolverConfig()
    coef = fit_boundary(small_space, data, cfg)
    assert fit_objective(small_space, data, cfg, coef) < 1e-20


@pytest.mark.parametrize("name,pde,s,p1,expr", [
    ("three-patch", "biharmonic", 1, 2, "x**2-3*x*y+y**2+x-1"),
    ("five-patch", "biharmonic", 1, 3, "x**3+y**3-x*y+2*x**2*y"),
    ("three-patch", "triharmonic", 2, 3, "x**3-2*x*y**2+y-0.5"),
    ("five-patch", "triharmonic", 2, 5, "x**5-x**2*y**3+2*x*y**4-y**2+1")])
def test_polynomial_solutions_reproduced(name, pde, s, p1, expr):
    u = ExactField(expr)
    space = assemble_smooth_space(builtin_domain(name), s, p1, 4)
    sol = solve_pde(space, BoundaryData.from_exact(u, pde), SolverConfig(pde=pde))
    errors = compute_errors(sol, u)
    assert max(errors.values()) <= 1e-8, errors


def test_zero_norm_is_undefined(small_space):
    sol = solve_pde(small_space, BoundaryData.zero(), SolverConfig())
    with pytest.raises(UndefinedNormError):
        compute_errors(sol, ExactField("0"))


def test_solution_evaluate_matches_field(small_space):
    u = ExactField("x**2 - x*y")
    sol = solve_pde(small_space, BoundaryData.from_exact(u, "biharmonic"), SolverConfig())
    t = np.linspace(0.1, 0.9, 5)
    pts = small_space.domain.patches[2].evaluate(t, t[::-1])
    assert np.allclose(sol.evaluate(2, t, t[::-1]), u(pts[:, 0], pts[:, 1]), atol=1e-12)
    assert np.allclose(sol.evaluate(2, t, t[::-1], LAPLACIAN), 2.0, atol=1e-9)


def test_threads_do_not_change_results(small_space, monkeypatch):
    u = ExactField()
    data = BoundaryData.from_exact(u, "biharmonic")
    monkeypatch.setenv("SMOOTHPATCH_THREADS", "1")
    a = solve_pde(small_space, data, SolverConfig()).coefficients
    monkeypatch.setenv("SMOOTHPATCH_THREADS", "4")
    assert thread_count() == 4
    b = solve_pde(small_space, data, SolverConfig()).coefficients
    assert np.array_equal(a, b)
    monkeypatch.setenv("SMOOTHPATCH_THREADS", "many")
    with pytest.raises(InvalidArgumentError):
        thread_count()


def test_report_csv_and_rates():
    rep = ConvergenceReport("d", "triharmonic", "A", 2, 3, Fraction(1, 5))
    rep.levels = [LevelResult(0, 0.2, 10, {"L2": 1.0, "H1": 1.0, "H2": 1.0, "H3": 1.0}, 0.0),
                  LevelResult(1, 0.1, 40, {"L2": 0.25, "H1": 0.25, "H2": 0.25, "H3": 0.5}, 0.0)]
    lines = rep.to_csv().splitlines()
    assert lines[0] == "level,h,dofs,errL2,errH1,errH2,errH3,rateL2,rateH1,rateH2,rateH3"
    assert lines[2].endswith("2.0000,2.0000,2.0000,1.0000")
    assert rep.final_rates()["H3"] == pytest.approx(1.0)


def test_short_convergence_study_rates():
    rep = convergence_study(builtin_domain("three-patch"), "biharmonic", "B", 1, levels=2,
                            h0=Fraction(1, 4))
    assert rep.header()[:4] == ["level", "h", "dofs", "errL2"]
    rates = rep.final_rates()
    assert rates["H2"] == pytest.approx(2.0, abs=0.3)
    assert rep.to_csv() == convergence_study(builtin_domain("three-patch"), "biharmonic", "B", 1,
                                             levels=2, h0=Fraction(1, 4)).to_csv()


def test_study_rejects_bad_h0():
    with pytest.raises(InvalidArgumentError):
        convergence_study(builtin_domain("three-patch"), "biharmonic", "A", 1, h0=Fraction(2, 5))
