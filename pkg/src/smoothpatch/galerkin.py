"""Galerkin discretization of the biharmonic and triharmonic equations."""
from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, UndefinedNormError
from .fields import ExactField
from .geometry import MultiPatchDomain, approximate_geometry, contained_in, view_geometry
from .numerics import composite_gauss, solve_spd, symmetrize, weighted_lstsq
from .pullback import (GRAD_LAPLACIAN, GRADIENT, LAPLACIAN, PhysicalMap, physical_map,
                       tensor_operator)
from .smoothspace import SmoothSpace, assemble_smooth_space

PDES = ("biharmonic", "triharmonic")
CASES = ("A", "B")


def pde_order(pde: str) -> int:
    if pde not in PDES:
        raise InvalidArgumentError(f"unknown pde {pde!r}; expected one of {PDES}")
    return 2 if pde == "biharmonic" else 3


def case_degree(case: str, s: int) -> int:
    """Interior degree p1 of Case A (mixed degree) or Case B (mixed regularity)."""
    if case not in CASES:
        raise InvalidArgumentError(f"unknown case {case!r}; expected A or B")
    return s + 1 if case == "A" else 2 * s + 1


def thread_count() -> int:
    raw = os.environ.get("SMOOTHPATCH_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidArgumentError(f"SMOOTHPATCH_THREADS={raw!r} is not an integer") from None


def _map_patches(func, count: int):
    threads = min(thread_count(), count)
    if threads <= 1:
        return [func(i) for i in range(count)]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(func, range(count)))


@dataclass(frozen=True)
class SolverConfig:
    pde: str = "biharmonic"
    omega: float | None = None
    omega1: float | None = None
    omega2: float | None = None
    quad: int | None = None

    def __post_init__(self):
        pde_order(self.pde)
        for name in ("omega", "omega1", "omega2"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise InvalidArgumentError(f"{name} must be nonnegative, got {value}")

    def points(self, space: SmoothSpace) -> int:
        q = self.quad if self.quad is not None else space.fine.p + 2
        if q < space.fine.p + 1:
            raise InvalidArgumentError(f"quadrature needs at least {space.fine.p + 1} points per span")
        return q

    def fit_weights(self, h: float) -> tuple[float, float]:
        """Weights of the normal-derivative and Laplacian terms of the boundary fit."""
        if self.pde == "biharmonic":
            wn = self.omega if self.omega is not None else h ** 2
            return wn, 0.0
        wn = self.omega1 if self.omega1 is not None else (self.omega if self.omega is not None else h ** 2)
        wl = self.omega2 if self.omega2 is not None else h ** 4
        return wn, wl


@dataclass
class BoundaryData:
    g: object
    g1: object
    g2: object
    g3: object = None

    @classmethod
    def from_exact(cls, u: ExactField, pde: str) -> "BoundaryData":
        return cls(g=u.source(pde), g1=u,
                   g2=lambda x, y, n: np.sum(u.gradient(x, y) * n, axis=-1),
                   g3=u.laplacian if pde == "triharmonic" else None)

    @classmethod
    def zero(cls) -> "BoundaryData":
        z = lambda x, y, *rest: np.zeros(np.shape(x))  # noqa: E731
        return cls(z, z, z, z)


# -- quadrature data ---------------------------------------------------------

@dataclass
class PatchQuadrature:
    x1: np.ndarray
    x2: np.ndarray
    weights: np.ndarray
    pmap: PhysicalMap = field(repr=False)

    @property
    def dx(self) -> np.ndarray:
        return self.weights * np.abs(self.pmap.det)


def patch_quadrature(space: SmoothSpace, patch: int, points: int, order: int) -> PatchQuadrature:
    rule = composite_gauss(space.fine.breakpoints, points)
    x = rule.nodes
    geo = space.domain.patches[patch].grid_derivatives(x, x, order)
    geo = {key: val.reshape(-1, 2) for key, val in geo.items()}
    pmap = physical_map(geo, order, where=f" on patch {patch}")
    w = np.outer(rule.weights, rule.weights).ravel()
    return PatchQuadrature(x, x, w, pmap)


def physical_operator(space: SmoothSpace, qd: PatchQuadrature, combo: dict) -> sp.csr_matrix:
    """Rows: quadrature points; columns: fine tensor coefficients of the patch."""
    return tensor_operator(space.fine, qd.x1, qd.x2, qd.pmap.weights(combo), grid=True)


def _energy_combos(pde: str):
    return [LAPLACIAN] if pde == "biharmonic" else list(GRAD_LAPLACIAN)


def assemble_stiffness(space: SmoothSpace, config: SolverConfig) -> sp.csr_matrix:
    """Full (all basis functions) stiffness matrix, exactly symmetric."""
    order = pde_order(config.pde)
    q = config.points(space)

    def one(i):
        qd = patch_quadrature(space, i, q, order)
        T = space.patch_matrices[i]
        K = None
        for combo in _energy_combos(config.pde):
            A = physical_operator(space, qd, combo) @ T
            part = A.T @ sp.diags(qd.dx) @ A
            K = part if K is None else K + part
        return K

    parts = _map_patches(one, len(space.domain.patches))
    return symmetrize(sum(parts[1:], parts[0]))


def assemble_source(space: SmoothSpace, g, config: SolverConfig) -> np.ndarray:
    """Vector of int g phi_i dx over all basis functions."""
    q = config.points(space)
    order = pde_order(config.pde)

    def one(i):
        qd = patch_quadrature(space, i, q, order)
        B = tensor_operator(space.fine, qd.x1, qd.x2, {(0, 0): 1.0}, grid=True)
        x = qd.pmap.x
        return space.patch_matrices[i].T @ (B.T @ (qd.dx * g(x[:, 0], x[:, 1])))

    return sum(_map_patches(one, len(space.domain.patches)))


def assemble_load(space: SmoothSpace, g, u_hg, config: SolverConfig, stiffness=None) -> np.ndarray:
    """g_i = int g phi_i - a(u_hg, phi_i) for all basis functions."""
    K = assemble_stiffness(space, config) if stiffness is None else stiffness
    u_hg = np.zeros(space.dim) if u_hg is None else np.asarray(u_hg, dtype=float)
    return assemble_source(space, g, config) - K @ u_hg


def homogeneous_dofs(space: SmoothSpace) -> np.ndarray:
    """Basis functions whose boundary traces vanish up to order s."""
    return space.homogeneous_indices()


def dropped_dofs(space: SmoothSpace) -> np.ndarray:
    mask = np.ones(space.dim, dtype=bool)
    mask[space.homogeneous_indices()] = False
    return np.flatnonzero(mask)


# -- boundary ------------------------------------------------------------------

@dataclass
class BoundarySamples:
    x: np.ndarray
    normal: np.ndarray
    weights: np.ndarray
    value: sp.csr_matrix
    normal_derivative: sp.csr_matrix
    laplacian: sp.csr_matrix | None


def boundary_samples(space: SmoothSpace, points: int, with_laplacian: bool) -> BoundarySamples:
    """Quadrature on all boundary edges with rows over the global basis."""
    order = 2 if with_laplacian else 1
    rule = composite_gauss(space.fine.breakpoints, points)
    v = rule.nodes
    xs, ns, ws, rows_v, rows_n, rows_l = [], [], [], [], [], []
    for e in space.domain.boundary_edges:
        view = e.views[0]
        patch = space.domain.patches[view.patch]
        vg = view_geometry(patch, view, np.zeros_like(v), v, 1)
        tangent, inward = vg[0, 1], vg[1, 0]
        normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=-1)
        normal *= np.where(np.sum(normal * inward, axis=1) > 0, -1.0, 1.0)[:, None]
        speed = np.linalg.norm(tangent, axis=1)
        normal /= speed[:, None]
        x1, x2 = view.param(np.zeros_like(v), v)
        geo = patch.derivatives(x1, x2, max(order, 1))
        pmap = physical_map(geo, max(order, 1), where=f" on boundary edge {e.index}")
        T = space.patch_matrices[view.patch]
        op = lambda w: tensor_operator(space.fine, x1, x2, w, grid=False) @ T  # noqa: E731
        rows_v.append(op({(0, 0): 1.0}))
        gw = [pmap.weights(c) for c in GRADIENT]
        nw = {}
        for comp in range(2):
            for gamma, w in gw[comp].items():
                nw[gamma] = nw.get(gamma, 0.0) + normal[:, comp] * w
        rows_n.append(op(nw))
        if with_laplacian:
            rows_l.append(op(pmap.weights(LAPLACIAN)))
        xs.append(geo[0, 0])
        ns.append(normal)
        ws.append(rule.weights * speed)
    return BoundarySamples(np.vstack(xs), np.vstack(ns), np.concatenate(ws),
                           sp.vstack(rows_v).tocsr(), sp.vstack(rows_n).tocsr(),
                           sp.vstack(rows_l).tocsr() if with_laplacian else None)


def fit_boundary(space: SmoothSpace, data: BoundaryData, config: SolverConfig,
                 samples: BoundarySamples | None = None) -> np.ndarray:
    """Global coefficient vector u_hg supported on the dropped functions."""
    tri = config.pde == "triharmonic"
    bs = samples or boundary_samples(space, config.points(space), tri)
    drop = dropped_dofs(space)
    wn, wl = config.fit_weights(space.h)
    x, y = bs.x[:, 0], bs.x[:, 1]
    blocks = [(bs.value, data.g1(x, y), bs.weights)]
    if wn > 0:
        blocks.append((bs.normal_derivative, data.g2(x, y, bs.normal), wn * bs.weights))
    if tri and wl > 0:
        blocks.append((bs.laplacian, data.g3(x, y), wl * bs.weights))
    A = np.vstack([b[0][:, drop].toarray() for b in blocks])
    rhs = np.concatenate([b[1] for b in blocks])
    w = np.concatenate([b[2] for b in blocks])
    coef = np.zeros(space.dim)
    if len(drop):
        coef[drop] = weighted_lstsq(A, rhs, w)
    return coef


def fit_objective(space: SmoothSpace, data: BoundaryData, config: SolverConfig, coef) -> float:
    tri = config.pde == "triharmonic"
    bs = boundary_samples(space, config.points(space), tri)
    wn, wl = config.fit_weights(space.h)
    x, y = bs.x[:, 0], bs.x[:, 1]
    val = np.sum(bs.weights * (bs.value @ coef - data.g1(x, y)) ** 2)
    val += wn * np.sum(bs.weights * (bs.normal_derivative @ coef - data.g2(x, y, bs.normal)) ** 2)
    if tri:
        val += wl * np.sum(bs.weights * (bs.laplacian @ coef - data.g3(x, y)) ** 2)
    return float(val)


# -- solve -------------------------------------------------------------------

@dataclass
class Solution:
    space: SmoothSpace
    coefficients: np.ndarray
    config: SolverConfig
    info: dict = field(default_factory=dict)

    @property
    def patch_coefficients(self) -> list:
        return self.space.fine_coefficients(self.coefficients)

    def evaluate(self, patch: int, xi1, xi2, combo=None) -> np.ndarray:
        """Physical derivative combination (default: value) at parameter points."""
        combo = combo or {(0, 0): 1.0}
        xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
        xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
        order = max(3, max(sum(a) for a in combo))
        geo = self.space.domain.patches[patch].derivatives(xi1, xi2, order)
        pmap = physical_map(geo, order)
        op = tensor_operator(self.space.fine, xi1, xi2, pmap.weights(combo), grid=False)
        return op @ self.patch_coefficients[patch]


def solve_pde(space: SmoothSpace, data: BoundaryData, config: SolverConfig) -> Solution:
    t0 = time.perf_counter()
    K = assemble_stiffness(space, config)
    u_g = fit_boundary(space, data, config)
    F = assemble_load(space, data.g, u_g, config, stiffness=K)
    keep = homogeneous_dofs(space)
    coef = u_g.copy()
    if len(keep):
        coef[keep] += solve_spd(K[keep][:, keep], F[keep])
    residual = K[keep] @ (coef - u_g) - F[keep] if len(keep) else np.zeros(0)
    info = {"dofs": space.dim, "homogeneous": int(len(keep)),
            "galerkin_residual": float(np.abs(residual).max()) if residual.size else 0.0,
            "seconds": time.perf_counter() - t0}
    return Solution(space, coef, config, info)


def _norms_patch(sol: Solution, exact: ExactField, i: int, points: int, tri: bool):
    space = sol.space
    qd = patch_quadrature(space, i, points, 3 if tri else 2)
    c = sol.patch_coefficients[i]
    x, y = qd.pmap.x[:, 0], qd.pmap.x[:, 1]
    dx = qd.dx

    def field(combo):
        return physical_operator(space, qd, combo) @ c

    out = {}
    uh = tensor_operator(space.fine, qd.x1, qd.x2, {(0, 0): 1.0}, grid=True) @ c
    u = exact(x, y)
    out["L2"] = (np.sum(dx * (u - uh) ** 2), np.sum(dx * u ** 2))
    gh = np.stack([field(g) for g in GRADIENT], -1)
    g = exact.gradient(x, y)
    out["H1"] = (np.sum(dx[:, None] * (g - gh) ** 2), np.sum(dx[:, None] * g ** 2))
    lh = field(LAPLACIAN)
    lap = exact.laplacian(x, y)
    out["H2"] = (np.sum(dx * (lap - lh) ** 2), np.sum(dx * lap ** 2))
    if tri:
        glh = np.stack([field(g) for g in GRAD_LAPLACIAN], -1)
        gl = exact.grad_laplacian(x, y)
        out["H3"] = (np.sum(dx[:, None] * (gl - glh) ** 2), np.sum(dx[:, None] * gl ** 2))
    return out


def compute_errors(sol: Solution, exact: ExactField, points: int | None = None) -> dict:
    """Relative errors in L2, H1 seminorm, and the Laplacian-based H2 (and H3) equivalents."""
    tri = sol.config.pde == "triharmonic"
    q = points if points is not None else sol.config.points(sol.space) + 1
    parts = _map_patches(lambda i: _norms_patch(sol, exact, i, q, tri),
                         len(sol.space.domain.patches))
    out = {}
    for key in parts[0]:
        num = sum(p[key][0] for p in parts)
        den = sum(p[key][1] for p in parts)
        if not den > 0:
            raise UndefinedNormError(f"exact solution has zero {key} (semi)norm")
        out[key] = math.sqrt(num / den)
    return out


# -- convergence -------------------------------------------------------------

@dataclass
class LevelResult:
    level: int
    h: float
    dofs: int
    errors: dict
    seconds: float = 0.0


@dataclass
class ConvergenceReport:
    domain: str
    pde: str
    case: str
    s: int
    p1: int
    h0: Fraction
    levels: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def norms(self) -> list:
        return ["L2", "H1", "H2"] + (["H3"] if self.pde == "triharmonic" else [])

    def rates(self) -> list:
        """Per level: log2 of consecutive error ratios (None on the first level)."""
        out = [None]
        for prev, cur in zip(self.levels, self.levels[1:]):
            ratio = math.log2(prev.h / cur.h)
            out.append({n: math.log2(prev.errors[n] / cur.errors[n]) / ratio
                        if cur.errors[n] > 0 and prev.errors[n] > 0 else float("nan")
                        for n in self.norms})
        return out

    def final_rates(self) -> dict:
        if len(self.levels) < 2:
            return {}
        return self.rates()[-1]

    def header(self) -> list:
        return (["level", "h", "dofs"] + [f"err{n}" for n in self.norms]
                + [f"rate{n}" for n in self.norms])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for lvl, rate in zip(self.levels, self.rates()):
            row = [lvl.level, f"{lvl.h:.10g}", lvl.dofs]
            row += [f"{lvl.errors[n]:.6e}" for n in self.norms]
            row += ["" if rate is None else f"{rate[n]:.4f}" for n in self.norms]
            w.writerow(row)
        return buf.getvalue()


def prepare_geometry(domain: MultiPatchDomain, p1: int, s: int, h0) -> MultiPatchDomain:
    """Approximate curved patches that are not in S^{p1, p1-1}_{h0} (kept G^s)."""
    h0 = Fraction(h0)
    if all(contained_in(p, p1, p1 - 1, h0) for p in domain.patches):
        return domain
    return approximate_geometry(domain, p1, p1 - 1, h0, smoothness=s)


def convergence_study(domain: MultiPatchDomain, pde: str, case: str, s: int, levels: int = 4,
                      h0=Fraction(1, 6), config: SolverConfig | None = None,
                      exact: ExactField | None = None, progress=None) -> ConvergenceReport:
    """Solve on h = h0 / 2^j, j < levels, and tabulate relative errors and orders."""
    p1 = case_degree(case, s)
    h0 = Fraction(h0)
    if h0.numerator != 1 or levels < 1:
        raise InvalidArgumentError(f"h0 must be 1/m and levels >= 1 (got {h0}, {levels})")
    config = config or SolverConfig(pde=pde)
    if config.pde != pde:
        raise InvalidArgumentError("config.pde does not match pde")
    exact = exact or ExactField()
    geo = prepare_geometry(domain, p1, s, h0)
    data = BoundaryData.from_exact(exact, pde)
    report = ConvergenceReport(domain.name, pde, case, s, p1, h0)
    report.info["geometry"] = dict(geo.info)
    for j in range(levels):
        h = h0 / 2 ** j
        k = h.denominator - 1
        t0 = time.perf_counter()
        space = assemble_smooth_space(geo, s, p1, k)
        sol = solve_pde(space, data, config)
        errs = compute_errors(sol, exact)
        lvl = LevelResult(j, float(h), space.dim, errs, time.perf_counter() - t0)
        report.levels.append(lvl)
        if progress:
            progress(lvl)
    return report
