"""Planar multi-patch domains: patches, topology, edge views, gluing data,
geometry approximation and JSON domain files."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar

from . import _data
from .errors import (ApproximationFailureError, DegenerateGeometryError,
                     InvalidArgumentError, UnsupportedTopologyError)
from .numerics import composite_gauss, constrained_basis, gauss_legendre, nullspace
from .traces import trace_values
from .univariate import UnivariateSpace, basis_matrices, tensor_rows

TOPOLOGY_TOL = 1e-9


def _fraction(value) -> Fraction:
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value).limit_denominator(10**12) if isinstance(value, float) else Fraction(value)


@dataclass(frozen=True, eq=False)
class Patch:
    """Tensor-product spline patch with control net ``net[j1, j2] in R^2``."""

    degree: int
    regularity: int
    h0: Fraction
    net: np.ndarray = field(repr=False)
    labels: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        net = np.asarray(self.net, dtype=float)
        n = self.space.n
        if net.shape != (n, n, 2):
            raise InvalidArgumentError(f"control net shape {net.shape} does not match ({n}, {n}, 2)")
        object.__setattr__(self, "net", net)

    @cached_property
    def space(self) -> UnivariateSpace:
        cells = 1 / Fraction(self.h0)
        if cells.denominator != 1:
            raise InvalidArgumentError(f"h0 = {self.h0} is not the reciprocal of an integer")
        return UnivariateSpace(self.degree, self.regularity, int(cells) - 1)

    @property
    def is_bilinear(self) -> bool:
        return self.degree == 1 and self.space.k == 0

    def derivatives(self, x1, x2, order: int) -> dict:
        """All parametric derivatives up to ``order`` at scattered points: (a, b) -> (npts, 2)."""
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        B1 = basis_matrices(self.space, x1, order)
        B2 = basis_matrices(self.space, x2, order)
        n = self.space.n
        out = {}
        for a in range(order + 1):
            for b in range(order + 1 - a):
                # sum_ij B1[q,i] B2[q,j] net[i,j,:]
                tmp = (B1[a] @ self.net.reshape(n, 2 * n)).reshape(-1, n, 2)
                out[a, b] = np.einsum("qj,qjc->qc", B2[b].toarray(), tmp)
        return out

    def grid_derivatives(self, x1, x2, order: int) -> dict:
        """Derivatives on the tensor grid x1 x x2: (a, b) -> (len(x1), len(x2), 2)."""
        B1 = basis_matrices(self.space, x1, order)
        B2 = basis_matrices(self.space, x2, order)
        out = {}
        for a in range(order + 1):
            for b in range(order + 1 - a):
                out[a, b] = np.stack(
                    [B1[a] @ (B2[b] @ self.net[:, :, c].T).T for c in range(2)], axis=-1)
        return out

    def evaluate(self, x1, x2, d1: int = 0, d2: int = 0) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        return np.asarray(tensor_rows(self.space, x1, x2, d1, d2) @ self.net.reshape(-1, 2))


def bilinear_patch(c00, c10, c01, c11) -> Patch:
    pts = [[c00, c01], [c10, c11]]
    labels = None
    if all(isinstance(x, str) for c in (c00, c10, c01, c11) for x in c):
        labels = tuple(tuple(tuple(p) for p in row) for row in pts)
    net = np.array([[[float(_fraction(x)) for x in p] for p in row] for row in pts])
    return Patch(1, 0, Fraction(1), net, labels)


def eval_geometry(patch: Patch, xi, order=(0, 0)) -> np.ndarray:
    """Point or parametric derivative of ``patch`` at parameters ``xi`` (..., 2)."""
    xi = np.asarray(xi, dtype=float)
    d1, d2 = order
    if d1 + d2 > 3 or min(d1, d2) < 0:
        raise InvalidArgumentError(f"derivative order {order} not supported")
    vals = patch.evaluate(xi[..., 0].ravel(), xi[..., 1].ravel(), d1, d2)
    return vals.reshape(xi.shape[:-1] + (2,))


# -- views -----------------------------------------------------------------

@dataclass(frozen=True)
class View:
    """A unit-square symmetry sigma composed with a patch.

    (u, v) -> w = (v, u) if swap else (u, v) -> xi_i = 1 - w_i if flip_i else w_i.
    The side u = 0 of the view is the edge, u > 0 points into the patch.
    """

    patch: int
    swap: bool
    flip1: bool
    flip2: bool

    def param(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        w1, w2 = (v, u) if self.swap else (u, v)
        return (1.0 - w1 if self.flip1 else w1), (1.0 - w2 if self.flip2 else w2)

    def derivative(self, a: int, b: int):
        """(d1, d2, sign) with d_u^a d_v^b (f o sigma) = sign * d^(d1, d2) f at sigma."""
        d1, d2 = (b, a) if self.swap else (a, b)
        sign = -1.0 if (d1 * self.flip1 + d2 * self.flip2) % 2 else 1.0
        return d1, d2, sign

    def index(self, i, j, n: int):
        """Patch tensor index (a, b) of the view coefficient (i, j)."""
        a, b = (j, i) if self.swap else (i, j)
        a = n - 1 - a if self.flip1 else a
        b = n - 1 - b if self.flip2 else b
        return a, b

    def reversed(self) -> "View":
        if self.swap:
            return replace(self, flip1=not self.flip1)
        return replace(self, flip2=not self.flip2)

    @property
    def side(self) -> int:
        x1, x2 = self.param(0.0, 0.5)
        if x1 == 0.0:
            return 0
        if x1 == 1.0:
            return 1
        return 2 if x2 == 0.0 else 3

    def corner(self, v_end: int) -> tuple[int, int]:
        x1, x2 = self.param(0.0, float(v_end))
        return int(x1), int(x2)


SIDE_VIEWS = {0: (False, False, False), 1: (False, True, False),
              2: (True, False, False), 3: (True, False, True)}


def side_view(patch: int, side: int) -> View:
    return View(patch, *SIDE_VIEWS[side])


def view_geometry(patch: Patch, view: View, u, v, order: int) -> dict:
    """Derivatives of F o sigma at (u, v): (a, b) -> (npts, 2)."""
    x1, x2 = view.param(u, v)
    raw = patch.derivatives(x1, x2, order)
    out = {}
    for a in range(order + 1):
        for b in range(order + 1 - a):
            d1, d2, sign = view.derivative(a, b)
            out[a, b] = sign * raw[d1, d2]
    return out


def view_cross_rows(space: UnivariateSpace, view: View, v, s: int):
    """cross[m][q]: dense rows of d_u^m d_v^q of the tensor basis (patch numbering)
    composed with the view, at the edge points (0, v)."""
    v = np.asarray(v, dtype=float)
    x1, x2 = view.param(np.zeros_like(v), v)
    cross = []
    for m in range(s + 1):
        row = []
        for q in range(s + 1):
            d1, d2, sign = view.derivative(m, q)
            row.append(sign * tensor_rows(space, x1, x2, d1, d2).toarray())
        cross.append(row)
    return cross


# -- topology --------------------------------------------------------------

@dataclass(frozen=True)
class GluingData:
    alpha: tuple
    beta: tuple
    lam: float


@dataclass
class Edge:
    index: int
    kind: str
    views: tuple
    vertices: tuple

    @property
    def patches(self) -> tuple:
        return tuple(v.patch for v in self.views)

    @property
    def is_inner(self) -> bool:
        return self.kind == "inner"


@dataclass
class Vertex:
    index: int
    position: np.ndarray
    kind: str
    patches: tuple
    edges: tuple
    corners: dict

    @property
    def patch_valency(self) -> int:
        return len(self.patches)

    @property
    def edge_valency(self) -> int:
        return len(self.edges)


@dataclass(eq=False)
class MultiPatchDomain:
    patches: list
    edges: list
    vertices: list
    name: str = ""
    gluing_override: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self._gluing_cache = {}

    @property
    def inner_edges(self):
        return [e for e in self.edges if e.is_inner]

    @property
    def boundary_edges(self):
        return [e for e in self.edges if not e.is_inner]

    def gluing(self, edge) -> GluingData:
        idx = edge.index if isinstance(edge, Edge) else int(edge)
        if idx in self.gluing_override:
            return self.gluing_override[idx]
        if idx not in self._gluing_cache:
            self._gluing_cache[idx] = gluing(self.edges[idx], self)
        return self._gluing_cache[idx]

    def side_edge(self, patch: int, side: int) -> tuple[Edge, View]:
        for e in self.edges:
            for view in e.views:
                if view.patch == patch and view.side == side:
                    return e, view
        raise KeyError((patch, side))


def _jacobian_det(patch: Patch, x1, x2):
    d = patch.derivatives(x1, x2, 1)
    return d[1, 0][:, 0] * d[0, 1][:, 1] - d[1, 0][:, 1] * d[0, 1][:, 0]


def check_regular(patch: Patch, index: int = 0, samples: int = 20):
    g = np.linspace(0.0, 1.0, samples)
    X1, X2 = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    det = _jacobian_det(patch, X1, X2)
    if not (np.all(det > 0) or np.all(det < 0)):
        raise DegenerateGeometryError(f"patch {index}: Jacobian determinant changes sign or vanishes")
    return float(np.sign(det[0]))


def _curve(patch: Patch, view: View, v):
    return view_geometry(patch, view, np.zeros_like(v), v, 0)[0, 0]


def build_topology(patches, tol: float = TOPOLOGY_TOL, name: str = "") -> MultiPatchDomain:
    patches = list(patches)
    for i, p in enumerate(patches):
        check_regular(p, i)

    # vertices by clustering corners
    positions: list[np.ndarray] = []
    corner_vertex = {}
    for i, p in enumerate(patches):
        for c in ((0, 0), (1, 0), (0, 1), (1, 1)):
            x = p.evaluate([c[0]], [c[1]])[0]
            for vid, y in enumerate(positions):
                if np.linalg.norm(x - y) <= tol:
                    break
            else:
                vid = len(positions)
                positions.append(x)
            corner_vertex[i, c] = vid

    sides = []
    for i in range(len(patches)):
        for side in range(4):
            view = side_view(i, side)
            ends = (corner_vertex[i, view.corner(0)], corner_vertex[i, view.corner(1)])
            if ends[0] == ends[1]:
                raise UnsupportedTopologyError(f"patch {i} side {side} is collapsed")
            sides.append((view, ends))

    groups: dict = {}
    for view, ends in sides:
        groups.setdefault(frozenset(ends), []).append((view, ends))

    vs = np.linspace(0.0, 1.0, 9)
    edges = []
    for (view, ends) in sides:
        group = groups[frozenset(ends)]
        if group[0][0] != view:
            continue
        if len(group) > 2:
            raise UnsupportedTopologyError(f"more than two patches share the side between vertices {ends}")
        if len(group) == 1:
            edges.append(Edge(len(edges), "boundary", (view,), ends))
            continue
        other, oends = group[1]
        if oends != ends:
            other = other.reversed()
        gap = np.abs(_curve(patches[view.patch], view, vs) - _curve(patches[other.patch], other, vs)).max()
        if gap > max(tol, 1e-12):
            raise UnsupportedTopologyError(
                f"patches {view.patch} and {other.patch} share corners but not the side curve (gap {gap:.2e})")
        dets = []
        for w in (view, other):
            g = view_geometry(patches[w.patch], w, np.zeros(1), np.array([0.5]), 1)
            dets.append(np.linalg.det(np.column_stack([g[1, 0][0], g[0, 1][0]])))
        if dets[0] * dets[1] >= 0:
            raise DegenerateGeometryError(
                f"patches {view.patch} and {other.patch} overlap across their common side")
        pair = (view, other) if dets[0] < 0 else (other, view)
        edges.append(Edge(len(edges), "inner", pair, ends))

    _check_t_junctions(patches, edges, positions, tol)
    vertices = _build_vertices(patches, edges, positions, corner_vertex)
    return MultiPatchDomain(patches, edges, vertices, name)


def _check_t_junctions(patches, edges, positions, tol):
    scale = max(1.0, max(float(np.abs(p).max()) for p in positions))
    v = np.linspace(0.0, 1.0, 401)
    for e in edges:
        view = e.views[0]
        curve = _curve(patches[view.patch], view, v)
        for vid, x in enumerate(positions):
            if vid in e.vertices:
                continue
            dist = np.linalg.norm(curve - x, axis=1)
            q = int(np.argmin(dist))
            lo, hi = v[max(q - 1, 0)], v[min(q + 1, len(v) - 1)]
            res = minimize_scalar(
                lambda t: np.linalg.norm(_curve(patches[view.patch], view, np.array([t]))[0] - x),
                bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            if res.fun <= 1e3 * tol * scale:
                raise UnsupportedTopologyError(f"vertex {vid} lies inside edge {e.index} (T-junction)")


def _angle(d):
    return math.atan2(d[1], d[0])


def _build_vertices(patches, edges, positions, corner_vertex):
    vertices = []
    for vid, pos in enumerate(positions):
        corners = {i: c for (i, c), w in corner_vertex.items() if w == vid}
        incident = [e for e in edges if vid in e.vertices]
        kind = "boundary" if any(not e.is_inner for e in incident) else "inner"
        ang = {}
        for i, c in corners.items():
            inward = (0.01 if c[0] == 0 else 0.99, 0.01 if c[1] == 0 else 0.99)
            ang[i] = _angle(patches[i].evaluate([inward[0]], [inward[1]])[0] - pos)
        eang = {}
        for e in incident:
            view = e.views[0]
            t = 0.01 if e.vertices[0] == vid else 0.99
            eang[e.index] = _angle(_curve(patches[view.patch], view, np.array([t]))[0] - pos)

        def ccw(a, b):
            return (b - a) % (2 * math.pi) < math.pi

        order = _fan_order(corners, incident, ang, ccw, kind)
        fan_edges = _fan_edges(order, incident, eang, ang, ccw, kind)
        vertices.append(Vertex(vid, np.array(pos), kind, tuple(order), tuple(fan_edges), corners))
    return vertices


def _fan_order(corners, incident, ang, ccw, kind):
    patches = sorted(corners)
    nbr = {i: [] for i in patches}
    for e in incident:
        if e.is_inner and all(p in corners for p in e.patches):
            a, b = e.patches
            nbr[a].append(b)
            nbr[b].append(a)
    if kind == "inner":
        start = patches[0]
    else:
        ends = [i for i in patches if len(nbr[i]) < 2]
        start = ends[0] if ends else patches[0]
    order = [start]
    while len(order) < len(patches):
        nxt = [j for j in nbr[order[-1]] if j not in order]
        if not nxt:
            raise UnsupportedTopologyError("patches around a vertex are not connected through edges")
        if len(order) == 1 and len(nxt) > 1:
            nxt = [j for j in nxt if ccw(ang[start], ang[j])]
        order.append(nxt[0])
    if len(order) > 1 and not ccw(ang[order[0]], ang[order[1]]):
        if kind == "inner":
            order = [order[0]] + order[1:][::-1]
        else:
            order = order[::-1]
    return order


def _fan_edges(order, incident, eang, ang, ccw, kind):
    def shared(a, b):
        for e in incident:
            if e.is_inner and set(e.patches) == {a, b}:
                return e.index
        raise UnsupportedTopologyError(f"patches {a} and {b} do not share an edge at the vertex")

    if kind == "inner":
        return [shared(order[r - 1], order[r]) for r in range(len(order))]
    bnd = [e for e in incident if not e.is_inner]
    first = [e.index for e in bnd if e.patches[0] == order[0] and ccw(eang[e.index], ang[order[0]])]
    last = [e.index for e in bnd if e.patches[0] == order[-1] and ccw(ang[order[-1]], eang[e.index])]
    if len(order) == 1:
        first = [e.index for e in bnd if ccw(eang[e.index], ang[order[0]])][:1]
        last = [e.index for e in bnd if e.index not in first][:1]
    return first[:1] + [shared(order[r - 1], order[r]) for r in range(1, len(order))] + last[:1]


# -- gluing data -----------------------------------------------------------

def _fit_linear(x, y, what, edge_index):
    coef = np.polynomial.polynomial.polyfit(x, y, 1)
    res = np.abs(np.polynomial.polynomial.polyval(x, coef) - y).max()
    if res > 1e-8 * max(1.0, np.abs(y).max()):
        raise DegenerateGeometryError(
            f"edge {edge_index}: {what} is not linear along the edge (residual {res:.2e})")
    return Polynomial(coef)


def edge_determinants(edge: Edge, domain: MultiPatchDomain, v):
    dets, betas = [], []
    for view in edge.views:
        g = view_geometry(domain.patches[view.patch], view, np.zeros_like(v), v, 1)
        du, dv = g[1, 0], g[0, 1]
        dets.append(du[:, 0] * dv[:, 1] - du[:, 1] * dv[:, 0])
        betas.append(np.sum(du * dv, axis=1) / np.sum(dv * dv, axis=1))
    return dets, betas


def lambda_closed_form(d0: Polynomial, d1: Polynomial) -> float:
    rule = gauss_legendre(4, 0.0, 1.0)
    num = rule.integrate(lambda x: d1(x) - d0(x))
    den = rule.integrate(lambda x: d0(x) ** 2 + d1(x) ** 2)
    return num / den


def lambda_objective(lam: float, d0: Polynomial, d1: Polynomial) -> float:
    rule = gauss_legendre(4, 0.0, 1.0)
    return rule.integrate(lambda x: (lam * d0(x) + 1.0) ** 2 + (lam * d1(x) - 1.0) ** 2)


def gluing(edge: Edge, domain: MultiPatchDomain) -> GluingData:
    if not edge.is_inner:
        raise InvalidArgumentError(f"edge {edge.index} is a boundary edge")
    v = np.linspace(0.0, 1.0, 11)
    dets, betas = edge_determinants(edge, domain, v)
    d = [_fit_linear(v, x, "det JF", edge.index) for x in dets]
    beta = tuple(_fit_linear(v, x, "beta", edge.index) for x in betas)
    lam = lambda_closed_form(*d)
    alpha = tuple(lam * x for x in d)
    ends = np.array([0.0, 1.0])
    if lam <= 0 or not (np.all(alpha[0](ends) < 0) and np.all(alpha[1](ends) > 0)):
        raise DegenerateGeometryError(f"edge {edge.index}: gluing function alpha changes sign")
    return GluingData(alpha, beta, lam)


# -- builtin domains and files ---------------------------------------------

def _vertex_patches(vertices, count):
    V = list(vertices) + [vertices[1]]
    return [bilinear_patch(V[0], V[2 * i + 3], V[2 * i + 1], V[2 * i + 2]) for i in range(count)]


BUILTIN_NAMES = ("three-patch", "five-patch", "g2-three-patch")


def builtin_patches(name: str) -> list:
    if name == "three-patch":
        return _vertex_patches(_data.THREE_PATCH_VERTICES, 3)
    if name == "five-patch":
        return _vertex_patches(_data.FIVE_PATCH_VERTICES, 5)
    if name == "g2-three-patch":
        out = []
        for net in _data.G2_THREE_PATCH_NETS:
            arr = np.array([[[float(Fraction(x)) for x in p] for p in row] for row in net])
            out.append(Patch(3, 2, Fraction(1, 4), arr, tuple(tuple(tuple(p) for p in row) for row in net)))
        return out
    if name == "square":
        return [bilinear_patch(("0", "0"), ("1", "0"), ("0", "1"), ("1", "1"))]
    raise InvalidArgumentError(f"unknown builtin domain {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def builtin_domain(name: str) -> MultiPatchDomain:
    return build_topology(builtin_patches(name), name=name)


def domain_to_json(domain: MultiPatchDomain) -> dict:
    patches = []
    for p in domain.patches:
        if p.labels is not None:
            net = [list(pt) for row in p.labels for pt in row]
        else:
            net = [[float(x), float(y)] for row in p.net for x, y in row]
        patches.append({"degree": p.degree, "regularity": p.regularity,
                        "h0": str(Fraction(p.h0)), "net": net})
    return {"name": domain.name, "patches": patches}


def domain_from_json(data) -> MultiPatchDomain:
    if isinstance(data, (str, Path)):
        data = json.loads(Path(data).read_text())
    try:
        patches = []
        for entry in data["patches"]:
            degree, reg = int(entry["degree"]), int(entry["regularity"])
            h0 = _fraction(entry.get("h0", 1))
            raw = entry["net"]
            n = math.isqrt(len(raw))
            if n * n != len(raw):
                raise InvalidArgumentError("net must list n*n points in j1-major order")
            labels = None
            if all(isinstance(x, str) for pt in raw for x in pt):
                labels = tuple(tuple(tuple(raw[i * n + j]) for j in range(n)) for i in range(n))
            net = np.array([[float(_fraction(x)) for x in pt] for pt in raw]).reshape(n, n, 2)
            patches.append(Patch(degree, reg, h0, net, labels))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise InvalidArgumentError(f"malformed domain file: {exc}") from exc
    return build_topology(patches, name=data.get("name", ""))


def load_domain(source: str) -> MultiPatchDomain:
    """Builtin name or path to a JSON domain file."""
    if source in BUILTIN_NAMES or source == "square":
        return builtin_domain(source)
    path = Path(source)
    if not path.exists():
        raise InvalidArgumentError(f"unknown domain {source!r}: not a builtin name or an existing file")
    return domain_from_json(path)


# -- geometry approximation -----------------------------------------------

def contained_in(patch: Patch, degree: int, regularity: int, h0) -> bool:
    """Whether the patch's spline space is a subspace of S^{degree, regularity}_{h0}."""
    src = patch.space
    cells = int(round(1 / float(h0)))
    nested = (cells % (src.k + 1) == 0)
    if src.k == 0:
        return src.p <= degree
    return src.p <= degree and src.r >= regularity and nested


def approximate_geometry(domain: MultiPatchDomain, degree: int, regularity: int, h0,
                         smoothness: int = 1, tol: float = 1e-9) -> MultiPatchDomain:
    """Least-squares refit of every patch into S^{degree, regularity}_{h0}.

    Corners are interpolated, and along every inner edge the refitted pair keeps
    the edge-trace conditions of orders 0..smoothness with the source domain's
    gluing data, so the result is G^smoothness with linear gluing functions.
    """
    h0 = _fraction(h0)
    target = UnivariateSpace(degree, regularity, int(1 / h0) - 1)
    n = target.n
    N = n * n
    P = len(domain.patches)
    gl = {e.index: domain.gluing(e) for e in domain.inner_edges}
    if all(contained_in(p, degree, regularity, h0) for p in domain.patches):
        return _embed(domain, target, h0, gl)

    breaks = np.union1d(target.breakpoints,
                        np.concatenate([p.space.breakpoints for p in domain.patches]))
    rule = composite_gauss(breaks, degree + 4)
    X1, X2 = (a.ravel() for a in np.meshgrid(rule.nodes, rule.nodes, indexing="ij"))
    W = np.sqrt(np.outer(rule.weights, rule.weights).ravel())
    rows = tensor_rows(target, X1, X2).toarray() * W[:, None]

    corner_rows, corner_vals = [], []
    for i, p in enumerate(domain.patches):
        for c in ((0, 0), (1, 0), (0, 1), (1, 1)):
            r = np.zeros(P * N)
            r[i * N + c[0] * (n - 1) * n + c[1] * (n - 1)] = 1.0
            corner_rows.append(r)
            corner_vals.append(p.evaluate([c[0]], [c[1]])[0])
    vq = composite_gauss(breaks, degree + 4 * smoothness + 2).nodes
    con = [np.zeros((0, P * N))]
    for e in domain.inner_edges:
        g = gl[e.index]
        traces = []
        for tau, view in enumerate(e.views):
            cross = view_cross_rows(target, view, vq, smoothness)
            traces.append(trace_values(cross, g.alpha[tau], g.beta[tau], vq, smoothness))
        for ell in range(smoothness + 1):
            block = np.zeros((len(vq), P * N))
            for tau, view in enumerate(e.views):
                sign = 1.0 if tau == 0 else -1.0
                block[:, view.patch * N:(view.patch + 1) * N] += sign * traces[tau][ell]
            con.append(block / np.abs(block).max(axis=1, keepdims=True).clip(1e-300))
    # kernel of the homogeneous interface conditions, then corners inside it
    Z = nullspace(np.vstack(con), tol)
    Cc, dc = np.array(corner_rows) @ Z, np.array(corner_vals)
    yp, Z2 = constrained_basis(Cc, dc, tol)
    infeas = float(np.abs(Cc @ yp - dc).max())
    if infeas > 1e-9 * max(1.0, np.abs(dc).max()):
        raise ApproximationFailureError(
            f"interface constraints infeasible in the target space (residual {infeas:.2e})", infeas)
    A = np.zeros((P * len(X1), P * N))
    b = np.zeros((P * len(X1), 2))
    for i, p in enumerate(domain.patches):
        A[i * len(X1):(i + 1) * len(X1), i * N:(i + 1) * N] = rows
        b[i * len(X1):(i + 1) * len(X1)] = p.evaluate(X1, X2) * W[:, None]
    AZ = A @ Z
    w = np.linalg.lstsq(AZ @ Z2, b - AZ @ yp, rcond=None)[0]
    x = Z @ (yp + Z2 @ w)

    new = [Patch(degree, regularity, h0, x[i * N:(i + 1) * N].reshape(n, n, 2)) for i in range(P)]
    g = np.linspace(0.0, 1.0, 41)
    G1, G2 = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    residual = max(float(np.abs(q.evaluate(G1, G2) - p.evaluate(G1, G2)).max())
                   for p, q in zip(domain.patches, new))
    out = build_topology(new, name=f"{domain.name}~S^{degree},{regularity}_{h0}")
    for e in out.inner_edges:
        src = _matching_edge(domain, e)
        if src.views != e.views:
            raise ApproximationFailureError("refitted domain changed the edge orientation", residual)
        out.gluing_override[e.index] = gl[src.index]
    out.info.update({"fit_residual": residual, "source": domain.name, "smoothness": smoothness})
    return out


def _embed(domain, target, h0, gl):
    """Exact re-representation of patches whose space is contained in the target."""
    g = target.greville
    G1, G2 = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    colloc = tensor_rows(target, G1, G2).toarray()
    new = []
    for p in domain.patches:
        net = np.linalg.solve(colloc, p.evaluate(G1, G2))
        new.append(Patch(target.p, target.r, h0, net.reshape(target.n, target.n, 2)))
    out = build_topology(new, name=domain.name)
    for e in out.inner_edges:
        out.gluing_override[e.index] = gl[_matching_edge(domain, e).index]
    t = np.linspace(0.0, 1.0, 41)
    T1, T2 = (a.ravel() for a in np.meshgrid(t, t, indexing="ij"))
    residual = max(float(np.abs(q.evaluate(T1, T2) - p.evaluate(T1, T2)).max())
                   for p, q in zip(domain.patches, new))
    out.info.update({"fit_residual": residual, "source": domain.name, "exact": True})
    return out


def _matching_edge(domain, edge):
    key = {(v.patch, v.side) for v in edge.views}
    for e in domain.edges:
        if {(v.patch, v.side) for v in e.views} == key:
            return e
    raise ApproximationFailureError("refitted domain has a different topology")
