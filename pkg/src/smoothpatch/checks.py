"""Invariant suites shared by the command line and the test-suite."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .geometry import (GluingData, MultiPatchDomain, builtin_domain, lambda_closed_form,
                       lambda_objective, edge_determinants)
from .mixed2d import build_mixed_2d, eval_all, mixed_dimension, project_into_mixed
from .pullback import (GRAD_LAPLACIAN, LAPLACIAN, divergence_form, multi_indices,
                       physical_map, tensor_operator)
from .smoothspace import SmoothSpace, assemble_smooth_space
from .univariate import UnivariateSpace, basis_matrix, tensor_rows


@dataclass
class SuiteResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""
    data: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<20} {self.value:.3e} (tol {self.tolerance:.0e}) {self.detail}".rstrip()


def admissible_sweep(kmax: int = 8):
    """(s, p1, k) for s in {1, 2}, admissible p1 and k up to kmax."""
    for s in (1, 2):
        for p1 in range(s + 1, 2 * s + 2):
            for k in range(max(2 * (s + 1) - p1, 2), kmax + 1):
                yield s, p1, k


def dimension_suite(kmax: int = 8) -> SuiteResult:
    bad = [(s, p1, k) for s, p1, k in admissible_sweep(kmax)
           if len(build_mixed_2d(s, p1, k).basis) != mixed_dimension(s, p1, k)]
    return SuiteResult("dimension", not bad, float(len(bad)), 0.0,
                       f"mismatches: {bad}" if bad else "")


def partition_suite(kmax: int = 8, samples: int = 20) -> SuiteResult:
    x = np.linspace(0.0, 1.0, samples)
    X1, X2 = (a.ravel() for a in np.meshgrid(x, x, indexing="ij"))
    worst, lowest = 0.0, 0.0
    for s, p1, k in admissible_sweep(kmax):
        vals = eval_all(build_mixed_2d(s, p1, k), X1, X2)
        worst = max(worst, float(np.abs(vals.sum(axis=1) - 1.0).max()))
        lowest = min(lowest, float(vals.min()))
    ok = worst <= 1e-12 and lowest >= -1e-14
    return SuiteResult("partition-of-unity", ok, worst, 1e-12, f"min value {lowest:.1e}",
                       {"sum_error": worst, "min_value": lowest})


def monomial_coefficients(space: UnivariateSpace, degree: int) -> np.ndarray:
    """Coefficients of x^degree in ``space`` (exact by Greville collocation)."""
    g = space.greville
    return np.linalg.solve(basis_matrix(space, g).toarray(), g ** degree)


def reproduction_suite(kmax: int = 8) -> SuiteResult:
    """Every coarse basis function and every monomial of total degree <= p1."""
    worst = 0.0
    for s, p1, k in admissible_sweep(kmax):
        space = build_mixed_2d(s, p1, k)
        n1 = space.coarse.n
        mono = [monomial_coefficients(space.coarse, d) for d in range(p1 + 1)]
        targets = np.concatenate([
            np.eye(n1 * n1).reshape(-1, n1, n1),
            [np.outer(mono[a], mono[b]) for a in range(p1 + 1) for b in range(p1 + 1 - a)],
        ])
        worst = max(worst, float(project_into_mixed(space, targets, samples=11)[1].max()))
    return SuiteResult("reproduction", worst <= 1e-10, worst, 1e-10)


def _order_derivatives(space: SmoothSpace, patch: int, x1, x2, cols, grid: bool) -> list:
    """Per derivative order m <= s: list of dense (npts, ncols) physical derivatives."""
    s = space.s
    if grid:
        X1, X2 = (a.ravel() for a in np.meshgrid(x1, x2, indexing="ij"))
    else:
        X1, X2 = x1, x2
    geo = space.domain.patches[patch].derivatives(X1, X2, max(s, 1))
    pmap = physical_map(geo, max(s, 1))
    T = space.patch_matrices[patch][:, cols]
    out = [[(tensor_rows(space.fine, X1, X2) @ T).toarray()]] + [[] for _ in range(s)]
    for alpha in multi_indices(s):
        op = tensor_operator(space.fine, X1, X2, pmap.weights({alpha: 1.0}), grid=False)
        out[sum(alpha)].append((op @ T).toarray())
    return out


def physical_jumps(space: SmoothSpace, samples: int = 50, columns=None) -> dict:
    """Per inner edge: max relative jump of physical derivatives of order <= s.

    A basis function's jump of order m is measured against its own largest
    order-m derivative over the whole domain (sampled on a grid per patch), so
    functions that only carry round-off on the edge's patches are not divided
    by a vanishing value.
    """
    v = np.linspace(0.0, 1.0, samples)
    g = np.linspace(0.0, 1.0, 21)
    cols = np.arange(space.dim) if columns is None else np.asarray(columns)
    per_patch = [[np.max([np.abs(d).max(axis=0) for d in ds], axis=0)
                  for ds in _order_derivatives(space, i, g, g, cols, grid=True)]
                 for i in range(len(space.domain.patches))]
    scale = [np.max([p[m] for p in per_patch], axis=0) for m in range(space.s + 1)]
    out = {}
    for e in space.domain.inner_edges:
        sides = []
        for view in e.views:
            x1, x2 = view.param(np.zeros_like(v), v)
            sides.append(_order_derivatives(space, view.patch, x1, x2, cols, grid=False))
        worst = 0.0
        for m in range(space.s + 1):
            jump = np.max([np.abs(a - b).max(axis=0) for a, b in zip(sides[0][m], sides[1][m])],
                          axis=0)
            rel = np.divide(jump, scale[m], out=np.zeros_like(jump), where=scale[m] > 0)
            worst = max(worst, float(rel.max()))
        out[e.index] = worst
    return out


def smoothness_suite(space: SmoothSpace, samples: int = 50, tol: float = 1e-8) -> SuiteResult:
    jumps = physical_jumps(space, samples)
    worst_edge = max(jumps, key=jumps.get) if jumps else None
    worst = jumps[worst_edge] if jumps else 0.0
    ok = worst <= tol
    detail = f"worst edge {worst_edge}" + ("" if ok else f": C^{space.s} jump across edge {worst_edge}")
    return SuiteResult("smoothness", ok, worst, tol, detail, {"jumps": jumps})


def independence_suite(space: SmoothSpace) -> SuiteResult:
    """Numerical rank of the stacked per-patch coefficient vectors."""
    import scipy.sparse as sp
    stacked = sp.vstack(space.patch_matrices).tocsc()
    sv = scipy.linalg.svdvals(stacked.toarray())
    ratio = sv[-1] / sv[0]
    return SuiteResult("independence", ratio > 1e-12, ratio, 1e-12, f"dim {space.dim}")


def lambda_suite(domain: MultiPatchDomain, tol: float = 1e-10) -> SuiteResult:
    """Closed-form lambda against a numerical minimizer of the objective.

    The objective is quadratic in lambda, so the symmetric difference quotient
    with unit step is its exact derivative; its root is found by bracketing.
    """
    worst = 0.0
    v = np.linspace(0.0, 1.0, 11)
    for e in domain.inner_edges:
        dets, _ = edge_determinants(e, domain, v)
        d = [Polynomial(np.polynomial.polynomial.polyfit(v, x, 1)) for x in dets]
        closed = lambda_closed_form(*d)

        def slope(lam):
            return 0.5 * (lambda_objective(lam + 1.0, *d) - lambda_objective(lam - 1.0, *d))

        hi = 1.0
        while slope(-hi) * slope(hi) > 0:
            hi *= 2.0
        found = brentq(slope, -hi, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        worst = max(worst, abs(found - closed) / max(abs(closed), 1e-300))
    return SuiteResult("gluing-lambda", worst <= tol, worst, tol)


def pullback_suite(domain: MultiPatchDomain | None = None, points: int = 20, seed: int = 0,
                   tol: float = 1e-11) -> SuiteResult:
    """Chain-rule integrands against the divergence form with N on curved patches."""
    domain = domain or builtin_domain("g2-three-patch")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for patch in domain.patches:
        x1, x2 = rng.random(points), rng.random(points)
        geo = patch.derivatives(x1, x2, 3)
        pmap = physical_map(geo, 3)
        fine = UnivariateSpace(5, 2, 3)
        ci, cj = rng.standard_normal((2, fine.n ** 2))
        par = [{(a, b): tensor_rows(fine, x1, x2, a, b) @ c for a in range(4) for b in range(4 - a)}
               for c in (ci, cj)]
        absdet = np.abs(pmap.det)
        lap = [pmap.apply(LAPLACIAN, p) for p in par]
        lap_n = [divergence_form(geo, p, 2)[0] for p in par]
        bi = lap[0] * lap[1] * absdet
        bi_n = lap_n[0] * lap_n[1] * absdet
        gl = [np.stack([pmap.apply(g, p) for g in GRAD_LAPLACIAN], -1) for p in par]
        tri = np.sum(gl[0] * gl[1], axis=1) * absdet
        forms = [divergence_form(geo, p, 3) for p in par]
        tri_n = np.einsum("pi,pij,pj->p", forms[0][0], forms[0][1], forms[1][0])
        for a, b in ((bi, bi_n), (tri, tri_n)):
            worst = max(worst, float(np.abs(a - b).max() / np.abs(a).max()))
    return SuiteResult("pullback", worst <= tol, worst, tol)


def perturbed_gluing(domain: MultiPatchDomain, edge: int, amount: float = 1e-3) -> dict:
    """Gluing override with the constant coefficient of alpha on one edge perturbed."""
    g = domain.gluing(edge)
    alpha = tuple(a + amount * a.coef[0] for a in g.alpha)
    return {edge: GluingData(alpha, g.beta, g.lam)}


SUITES = ("dimension", "partition-of-unity", "reproduction", "smoothness", "independence",
          "gluing-lambda", "pullback")


def run_suites(domain: MultiPatchDomain, s: int, p1: int, k: int, names=SUITES,
               gluing: dict | None = None, kmax: int = 8) -> list:
    results = []
    space = None
    for name in names:
        if name in ("smoothness", "independence") and space is None:
            space = assemble_smooth_space(domain, s, p1, k, gluing=gluing)
        if name == "dimension":
            results.append(dimension_suite(kmax))
        elif name == "partition-of-unity":
            results.append(partition_suite(kmax))
        elif name == "reproduction":
            results.append(reproduction_suite(kmax))
        elif name == "smoothness":
            results.append(smoothness_suite(space))
        elif name == "independence":
            results.append(independence_suite(space))
        elif name == "gluing-lambda":
            results.append(lambda_suite(domain) if domain.inner_edges
                           else SuiteResult("gluing-lambda", True, 0.0, 1e-10, "no inner edges"))
        elif name == "pullback":
            results.append(pullback_suite())
        else:
            raise KeyError(name)
    return results
