"""The C^s-smooth space W^s over a multi-patch domain as a direct sum of
patch, edge and vertex subspaces.

Every global function is stored per patch as coefficients over the fine
tensor space S_h^{2s+1, s} x S_h^{2s+1, s} (index j1 * n2 + j2).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from numpy.polynomial import Polynomial

from .errors import InconsistentTraceError, InvalidArgumentError
from .geometry import Edge, MultiPatchDomain, View, view_cross_rows
from .mixed2d import MixedSpace2D, build_mixed_2d, fine_coeffs
from .numerics import KERNEL_TOL, nullspace, spectral_gap
from .traces import trace_values
from .univariate import UnivariateSpace, basis_matrix, basis_matrices, evaluate

DROP_TOL = 1e-14


@dataclass(frozen=True)
class EdgeTrace:
    edge: int
    ell: int
    space: UnivariateSpace
    coefficients: np.ndarray = field(repr=False)


@dataclass(eq=False)
class SmoothBasisFunction:
    tag: tuple
    homogeneous: bool
    coefficients: dict = field(repr=False)

    @property
    def kind(self) -> str:
        return self.tag[0]

    @property
    def patches(self) -> tuple:
        return tuple(sorted(self.coefficients))


# -- univariate helpers ----------------------------------------------------

def trace_space(s: int, k: int, ell: int, inner: bool = True) -> UnivariateSpace:
    p2 = 2 * s + 1
    if inner:
        return UnivariateSpace(p2 - ell, 2 * s - ell, k)
    return UnivariateSpace(p2, s, k)


def endpoint_matrix(fine: UnivariateSpace, s: int) -> np.ndarray:
    """D[m, j] = N_j^{(m)}(0) for m, j <= s (lower triangular)."""
    return np.array([[basis_matrix(fine, [0.0], m)[0, j] for j in range(s + 1)]
                     for m in range(s + 1)])


class _Collocation:
    """Greville collocation in a univariate space (exact for space members)."""

    def __init__(self, space: UnivariateSpace):
        self.space = space
        self.points = space.greville
        self.lu = scipy.linalg.lu_factor(basis_matrix(space, self.points).toarray())

    def solve(self, values):
        return scipy.linalg.lu_solve(self.lu, values)


def spline_multiply(space: UnivariateSpace, coeffs, poly, target: UnivariateSpace | None = None):
    """Coefficients of (spline * polynomial) in ``target`` (default S^{p + deg, r}).

    The product of a degree-p spline with regularity r and a polynomial of degree
    q lies in S^{p+q, r}; it is recovered by collocation at the target's Greville
    points, which is exact up to round-off for members of the space.
    """
    poly = poly if isinstance(poly, Polynomial) else Polynomial(poly)
    q = poly.degree() if np.any(poly.coef) else 0
    if target is None:
        target = UnivariateSpace(space.p + q, space.r, space.k)
    if target.k != space.k or target.p < space.p + q or target.r > space.r:
        raise InvalidArgumentError(
            f"product of degree {space.p}+{q} does not fit into S^{target.p},{target.r}")
    col = _Collocation(target)
    vals = evaluate(space, coeffs, col.points) * poly(col.points)
    return col.solve(vals)


def coeffs_from_cross_derivatives(fine: UnivariateSpace, s: int, traces) -> np.ndarray:
    """Band rows j1 = 0..s (view coordinates) from g_m = d_u^m f(0, .) given as
    coefficient vectors over ``fine`` (array (s+1, n2))."""
    g = np.asarray(traces, dtype=float)
    if g.shape != (s + 1, fine.n):
        raise InvalidArgumentError(f"expected traces of shape {(s + 1, fine.n)}, got {g.shape}")
    return scipy.linalg.solve_triangular(endpoint_matrix(fine, s), g, lower=True)


def project_trace(fine: UnivariateSpace, func, tol: float = 1e-10) -> np.ndarray:
    """Coefficients of a callable in ``fine``; raises if it is not a member."""
    col = _Collocation(fine)
    c = col.solve(func(col.points))
    x = np.linspace(0.0, 1.0, 10 * fine.n + 1)
    want = func(x)
    res = np.abs(evaluate(fine, c, x) - want).max()
    if res > tol * max(1.0, np.abs(want).max()):
        raise InconsistentTraceError(f"trace is not in S^{fine.p},{fine.r} (residual {res:.2e})")
    return c


def edge_trace(domain: MultiPatchDomain, edge: Edge, tau: int, space: UnivariateSpace,
               coeffs, ell: int, v, s: int | None = None) -> np.ndarray:
    """f_ell^{(i, tau)} at v for a patch function with tensor coefficients ``coeffs``.

    On boundary edges the trace is the plain transversal derivative.
    """
    s = ell if s is None else s
    view = edge.views[tau]
    v = np.asarray(v, dtype=float)
    cross = view_cross_rows(space, view, v, ell)
    c = np.asarray(coeffs, dtype=float).reshape(-1, 1)
    cross = [[m @ c for m in row] for row in cross]
    if not edge.is_inner:
        return cross[ell][0][:, 0]
    g = domain.gluing(edge)
    return trace_values(cross, g.alpha[tau], g.beta[tau], v, ell)[ell][:, 0]


# -- the space -------------------------------------------------------------

@dataclass(eq=False)
class SmoothSpace:
    domain: MultiPatchDomain
    s: int
    p1: int
    k: int
    mixed: MixedSpace2D = field(repr=False)
    functions: list = field(default_factory=list, repr=False)
    info: dict = field(default_factory=dict)

    @property
    def fine(self) -> UnivariateSpace:
        return self.mixed.fine

    @property
    def h(self) -> float:
        return 1.0 / (self.k + 1)

    @property
    def dim(self) -> int:
        return len(self.functions)

    def block_sizes(self) -> dict:
        out = {"patch": 0, "edge": 0, "vertex": 0}
        for f in self.functions:
            out[f.kind] += 1
        return out

    @cached_property
    def patch_matrices(self) -> list:
        """Per patch: sparse (n2^2, dim) map from global to fine coefficients."""
        n2sq = self.fine.n ** 2
        parts = [([], [], []) for _ in self.domain.patches]
        for col, f in enumerate(self.functions):
            for patch, (idx, val) in f.coefficients.items():
                r, c, v = parts[patch]
                r.append(idx)
                c.append(np.full(len(idx), col))
                v.append(val)
        out = []
        for r, c, v in parts:
            if r:
                m = sp.csc_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                                  shape=(n2sq, self.dim))
            else:
                m = sp.csc_matrix((n2sq, self.dim))
            out.append(m)
        return out

    def homogeneous_indices(self) -> np.ndarray:
        return np.array([i for i, f in enumerate(self.functions) if f.homogeneous], dtype=int)

    def fine_coefficients(self, coef) -> list:
        """Per-patch fine coefficient vectors of the global combination ``coef``."""
        return [m @ np.asarray(coef, dtype=float) for m in self.patch_matrices]

    def summary(self) -> dict:
        return {
            "domain": self.domain.name,
            "s": self.s, "p1": self.p1, "k": self.k, "h": self.h,
            "mixed_dim_per_patch": self.mixed.dim,
            "mixed_blocks": dict(self.mixed.block_sizes),
            "blocks": self.block_sizes(),
            "total": self.dim,
            "homogeneous": int(len(self.homogeneous_indices())),
            "vertex_kernels": self.info.get("vertex_kernels", {}),
            "edge_counts": self.info.get("edge_counts", {}),
        }


def _sparse(arr):
    arr = np.asarray(arr).ravel()
    scale = np.abs(arr).max() if arr.size else 0.0
    idx = np.flatnonzero(np.abs(arr) > DROP_TOL * scale) if scale > 0 else np.array([], int)
    return idx, arr[idx]


class _Builder:
    def __init__(self, domain: MultiPatchDomain, s: int, p1: int, k: int, tol: float,
                 gluing: dict | None = None):
        self.domain, self.s, self.p1, self.k, self.tol = domain, s, p1, k, tol
        self.mixed = build_mixed_2d(s, p1, k)
        self.fine = self.mixed.fine
        self.n2 = self.fine.n
        self.colloc = _Collocation(self.fine)
        self.Dinv = np.linalg.inv(endpoint_matrix(self.fine, s))
        self.gluing = gluing or {}
        self._ops = {}

    def glue(self, e: Edge):
        return self.gluing.get(e.index) or self.domain.gluing(e)

    def trace_dims(self, e: Edge):
        return [trace_space(self.s, self.k, ell, e.is_inner).n for ell in range(self.s + 1)]

    def band_operator(self, e: Edge, tau: int):
        """Per ell: array (s+1, n2, n_ell) mapping trace coefficients of order ell to
        band rows (view coordinates)."""
        key = (e.index, tau)
        if key in self._ops:
            return self._ops[key]
        s, n2 = self.s, self.n2
        ops = []
        x = self.colloc.points
        for ell in range(s + 1):
            if not e.is_inner:
                n = n2
                g = np.zeros((s + 1, n2, n))
                g[ell] = np.eye(n2)
            else:
                gl = self.glue(e)
                alpha, beta = gl.alpha[tau], gl.beta[tau]
                tsp = trace_space(s, self.k, ell)
                n = tsp.n
                ders = basis_matrices(tsp, x, s - ell)
                g = np.zeros((s + 1, n2, n))
                for m in range(ell, s + 1):
                    factor = comb(m, ell) * beta(x) ** (m - ell) * alpha(x) ** ell
                    g[m] = self.colloc.solve(factor[:, None] * ders[m - ell].toarray())
            ops.append(np.einsum("jm,mbn->jbn", self.Dinv, g))
        self._ops[key] = ops
        return ops

    def band_indices(self, view: View):
        j1, j2 = np.meshgrid(np.arange(self.s + 1), np.arange(self.n2), indexing="ij")
        a, b = view.index(j1, j2, self.n2)
        return a * self.n2 + b

    # patch functions
    def patch_functions(self, patch: int):
        out = []
        for pos, b in enumerate(self.mixed.basis):
            if b.group == "S2":
                continue
            idx, val = _sparse(fine_coeffs(self.mixed, b))
            out.append(SmoothBasisFunction(("patch", patch, b.group, b.j1, b.j2), True,
                                           {patch: (idx, val)}))
        return out

    # edge functions
    def edge_functions(self, e: Edge):
        s = self.s
        out, counts = [], []
        for ell in range(s + 1):
            n = self.trace_dims(e)[ell]
            j_range = range(2 * s + 1 - ell, n + ell - (2 * s + 2) + 1)
            counts.append(len(j_range))
            for j2 in j_range:
                coeffs = {}
                for tau, view in enumerate(e.views):
                    rows = self.band_operator(e, tau)[ell][:, :, j2]
                    arr = np.zeros(self.n2 * self.n2)
                    arr[self.band_indices(view).ravel()] = rows.ravel()
                    coeffs[view.patch] = _sparse(arr)
                out.append(SmoothBasisFunction(("edge", e.index, ell, j2), e.is_inner, coeffs))
        return out, counts

    # vertex functions
    def vertex_unknowns(self, vertex):
        """Trace unknowns near the vertex: list of (edge, ell, trace index)."""
        s = self.s
        unknowns = []
        for ei in vertex.edges:
            e = self.domain.edges[ei]
            at_start = e.vertices[0] == vertex.index
            for ell in range(s + 1):
                n = self.trace_dims(e)[ell]
                local = range(2 * s + 1 - ell)
                unknowns += [(ei, ell, j if at_start else n - 1 - j) for j in local]
        return unknowns

    def side_operator(self, e: Edge, tau: int, unknowns):
        """Dense (n2*n2, nunk) patch-coefficient operator of one side."""
        n2 = self.n2
        ops = self.band_operator(e, tau)
        idx = self.band_indices(e.views[tau]).ravel()
        out = np.zeros((n2 * n2, len(unknowns)))
        for col, (ei, ell, j) in enumerate(unknowns):
            if ei == e.index:
                out[idx, col] = ops[ell][:, :, j].ravel()
        return out

    def vertex_functions(self, vertex):
        s, n2 = self.s, self.n2
        unknowns = self.vertex_unknowns(vertex)
        fan_edges = set(vertex.edges)
        side_ops = {}
        for patch in vertex.patches:
            for side in range(4):
                e, view = self.domain.side_edge(patch, side)
                if e.index in fan_edges:
                    tau = e.views.index(view)
                    side_ops[patch, side] = self.side_operator(e, tau, unknowns)
        lo, hi = np.arange(s + 1), n2 - 1 - np.arange(s + 1)
        corners = {(0, 2): (lo, lo), (1, 2): (hi, lo), (0, 3): (lo, hi), (1, 3): (hi, hi)}
        rows = []
        for patch in vertex.patches:
            for (sa, sb), (ia, ib) in corners.items():
                A = side_ops.get((patch, sa))
                B = side_ops.get((patch, sb))
                if A is None and B is None:
                    continue
                idx = (ia[:, None] * n2 + ib[None, :]).ravel()
                diff = (A[idx] if A is not None else 0.0) - (B[idx] if B is not None else 0.0)
                rows.append(diff)
        M = np.vstack(rows) if rows else np.zeros((0, len(unknowns)))
        K = nullspace(M, self.tol) if M.shape[0] else np.eye(len(unknowns))
        gap = spectral_gap(M, self.tol) if M.shape[0] else np.inf
        if gap < 1e3:
            warnings.warn(f"vertex {vertex.index}: weak spectral gap {gap:.1e} in the kernel computation",
                          RuntimeWarning, stacklevel=2)

        bmask = np.array([not self.domain.edges[ei].is_inner for ei, _, _ in unknowns])
        blocks = []
        if bmask.any() and K.shape[1]:
            Q = nullspace(K[bmask], self.tol)
            blocks.append((K @ Q, True))
            blocks.append((K @ nullspace(Q.T, self.tol) if Q.shape[1] else K, False))
        else:
            blocks.append((K, True))

        out = []
        for basis, homogeneous in blocks:
            if basis.shape[1] == 0:
                continue
            basis = _determining_set_basis(basis)
            for c in range(basis.shape[1]):
                x = basis[:, c]
                coeffs = {}
                for patch in vertex.patches:
                    arr = np.zeros(n2 * n2)
                    for side in range(4):
                        op = side_ops.get((patch, side))
                        if op is None:
                            continue
                        vals = op @ x
                        nz = np.flatnonzero(np.any(op != 0, axis=1))
                        arr[nz] = vals[nz]
                    coeffs[patch] = _sparse(arr)
                out.append(SmoothBasisFunction(("vertex", vertex.index, len(out)), homogeneous, coeffs))
        info = {"unknowns": len(unknowns), "constraints": int(M.shape[0]),
                "kernel": int(K.shape[1]), "homogeneous": sum(f.homogeneous for f in out),
                "gap": float(gap)}
        return out, info


def _determining_set_basis(B: np.ndarray) -> np.ndarray:
    """Re-triangularize a kernel basis so that it is the identity on pivot unknowns
    chosen by column-pivoted QR (a numerical minimal determining set)."""
    _, _, piv = scipy.linalg.qr(B.T, pivoting=True, mode="economic")
    sel = piv[:B.shape[1]]
    out = np.linalg.solve(B[sel].T, B.T).T
    out[np.abs(out) < 1e-13] = 0.0
    return out


def check_smooth_config(domain: MultiPatchDomain, s: int, p1: int, k: int):
    if k < 2 * s and len(domain.patches) > 0:
        raise InvalidArgumentError(
            f"k={k} too small for the edge and vertex construction: need k >= 2s = {2 * s}")


def build_patch_subspace(builder: _Builder, patch: int):
    return builder.patch_functions(patch)


def build_edge_subspace(builder: _Builder, edge: Edge):
    return builder.edge_functions(edge)[0]


def build_vertex_subspace(builder: _Builder, vertex):
    return builder.vertex_functions(vertex)[0]


def assemble_smooth_space(domain: MultiPatchDomain, s: int, p1: int, k: int,
                          tol: float = KERNEL_TOL, gluing: dict | None = None) -> SmoothSpace:
    """Global basis ordered patch block, edge block, vertex block.

    ``gluing`` optionally overrides the gluing data per edge index (used for
    fault injection in the invariant checks).
    """
    check_smooth_config(domain, s, p1, k)
    b = _Builder(domain, s, p1, k, tol, gluing)
    functions = []
    for i in range(len(domain.patches)):
        functions += b.patch_functions(i)
    edge_counts = {}
    for e in domain.edges:
        fs, counts = b.edge_functions(e)
        functions += fs
        edge_counts[e.index] = {"kind": e.kind, "per_order": counts}
    vertex_info = {}
    for v in domain.vertices:
        fs, info = b.vertex_functions(v)
        functions += fs
        info["kind"] = v.kind
        vertex_info[v.index] = info
    space = SmoothSpace(domain, s, p1, k, b.mixed, functions)
    space.info.update({"vertex_kernels": vertex_info, "edge_counts": edge_counts})
    return space
