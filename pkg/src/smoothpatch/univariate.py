"""Univariate spline spaces with uniform open knots, coarse-to-fine
representation coefficients and boundary truncation."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError

MAX_DERIVATIVE = 6


@dataclass(frozen=True)
class UnivariateSpace:
    p: int
    r: int
    k: int

    def __post_init__(self):
        if self.p < 0 or self.k < 0:
            raise InvalidArgumentError(f"need p >= 0 and k >= 0, got p={self.p}, k={self.k}")
        if self.r < 0 or (self.p > 0 and self.r >= self.p):
            raise InvalidArgumentError(
                f"regularity must satisfy 0 <= r <= p-1, got p={self.p}, r={self.r}")

    @property
    def h(self) -> float:
        return 1.0 / (self.k + 1)

    @property
    def n(self) -> int:
        return self.p + 1 + self.k * (self.p - self.r)

    @cached_property
    def exact_knots(self) -> tuple[Fraction, ...]:
        inner = [Fraction(j, self.k + 1) for j in range(1, self.k + 1)
                 for _ in range(self.p - self.r)]
        return (Fraction(0),) * (self.p + 1) + tuple(inner) + (Fraction(1),) * (self.p + 1)

    @cached_property
    def knots(self) -> np.ndarray:
        return np.array([float(t) for t in self.exact_knots])

    @cached_property
    def breakpoints(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.k + 2)

    @cached_property
    def greville(self) -> np.ndarray:
        t = self.knots
        if self.p == 0:
            return 0.5 * (t[:-1] + t[1:])
        return np.array([t[i + 1:i + self.p + 1].mean() for i in range(self.n)])

    def span(self, x) -> np.ndarray:
        """Knot-span index mu with t[mu] <= x < t[mu+1], closed at x = 1."""
        x = np.asarray(x, dtype=float)
        cell = np.clip(np.floor(x * (self.k + 1) + 1e-10).astype(int), 0, self.k)
        return self.p + cell * (self.p - self.r)


def make_space(p: int, r: int, k: int) -> UnivariateSpace:
    if r >= p:
        raise InvalidArgumentError(f"regularity r={r} must be below degree p={p}")
    return UnivariateSpace(p, r, k)


def _local_ders(space: UnivariateSpace, x: np.ndarray, nd: int):
    """Nonzero basis derivatives at each x: array (npts, nd+1, p+1) and spans."""
    p, t = space.p, space.knots
    x = np.asarray(x, dtype=float).ravel()
    mu = space.span(x)
    m = len(x)
    ndu = np.zeros((m, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - t[mu + 1 - j]
        right[:, j] = t[mu + j] - x
        saved = np.zeros(m)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved
    ders = np.zeros((m, nd + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    for r in range(p + 1):
        a = np.zeros((m, 2, p + 1))
        a[:, 0, 0] = 1.0
        s1, s2 = 0, 1
        for kk in range(1, min(nd, p) + 1):
            d = np.zeros(m)
            rk, pk = r - kk, p - kk
            if r >= kk:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = kk - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, kk] = -a[:, s1, kk - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, kk] * ndu[:, r, pk]
            ders[:, kk, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for kk in range(1, min(nd, p) + 1):
        ders[:, kk, :] *= fac
        fac *= p - kk
    return ders, mu


def _check_order(d: int):
    if d < 0 or d > MAX_DERIVATIVE:
        raise InvalidArgumentError(f"derivative order {d} outside [0, {MAX_DERIVATIVE}]")


def eval_basis(space: UnivariateSpace, d: int, xi: float) -> np.ndarray:
    """All basis functions' d-th derivatives at ``xi`` as a dense vector."""
    _check_order(d)
    if not 0.0 <= xi <= 1.0:
        raise InvalidArgumentError(f"xi={xi} outside [0, 1]")
    out = np.zeros(space.n)
    ders, mu = _local_ders(space, np.array([xi]), d)
    out[mu[0] - space.p:mu[0] + 1] = ders[0, d]
    return out


def basis_matrix(space: UnivariateSpace, x, d: int = 0) -> sp.csr_matrix:
    """Sparse collocation matrix B[q, i] = N_i^{(d)}(x_q)."""
    _check_order(d)
    x = np.asarray(x, dtype=float).ravel()
    ders, mu = _local_ders(space, x, d)
    p = space.p
    rows = np.repeat(np.arange(len(x)), p + 1)
    cols = (mu[:, None] - p + np.arange(p + 1)[None, :]).ravel()
    return sp.csr_matrix((ders[:, d, :].ravel(), (rows, cols)), shape=(len(x), space.n))


def basis_matrices(space: UnivariateSpace, x, nd: int) -> list[sp.csr_matrix]:
    """Collocation matrices for derivative orders 0..nd, sharing one evaluation."""
    _check_order(nd)
    x = np.asarray(x, dtype=float).ravel()
    ders, mu = _local_ders(space, x, nd)
    p = space.p
    rows = np.repeat(np.arange(len(x)), p + 1)
    cols = (mu[:, None] - p + np.arange(p + 1)[None, :]).ravel()
    return [sp.csr_matrix((ders[:, d, :].ravel(), (rows, cols)), shape=(len(x), space.n))
            for d in range(nd + 1)]


def evaluate(space: UnivariateSpace, coeffs, x, d: int = 0) -> np.ndarray:
    return basis_matrix(space, x, d) @ np.asarray(coeffs, dtype=float)


def _blossom(knots, p, span, coefs, args):
    """de Boor's algorithm with a different argument per level (polar form)."""
    c = [coefs[span - p + j] for j in range(p + 1)]
    for lev in range(1, p + 1):
        u = args[lev - 1]
        for j in range(p, lev - 1, -1):
            i = span - p + j
            a = (u - knots[i]) / (knots[i + p + 1 - lev] - knots[i])
            c[j] = (1 - a) * c[j - 1] + a * c[j]
    return c[p]


@lru_cache(maxsize=64)
def _exact_mu(p1, r1, p2, r2, k):
    coarse, fine = UnivariateSpace(p1, r1, k), UnivariateSpace(p2, r2, k)
    t1, t2 = coarse.exact_knots, fine.exact_knots
    n1, n2 = coarse.n, fine.n
    mu = [[Fraction(0)] * n1 for _ in range(n2)]
    for j in range(n2):
        args = t2[j + 1:j + p2 + 1]
        # a nonempty span inside supp N_j
        m = next(m for m in range(j, j + p2 + 1) if t2[m] < t2[m + 1])
        cell = int(t2[m] * (k + 1))
        span1 = p1 + cell * (p1 - r1)
        subsets = list(combinations(range(p2), p1))
        for i in range(span1 - p1, span1 + 1):
            e = [0] * n1
            e[i] = 1
            total = sum(_blossom(t1, p1, span1, e, [args[q] for q in sub]) for sub in subsets)
            mu[j][i] = Fraction(total) / len(subsets)
    return tuple(tuple(row) for row in mu)


@dataclass(frozen=True)
class RepresentationMatrix:
    coarse: UnivariateSpace
    fine: UnivariateSpace
    mu: np.ndarray = field(repr=False)


def representation_matrix(coarse: UnivariateSpace, fine: UnivariateSpace) -> RepresentationMatrix:
    """Coefficients mu[j, i] with N_i^{coarse} = sum_j mu[j, i] N_j^{fine}.

    Computed exactly in rational arithmetic from blossoms: the fine coefficient
    is the degree-elevated polar form of the coarse piece at the fine knots.
    """
    if coarse.k != fine.k or coarse.p > fine.p or coarse.r < fine.r:
        raise InvalidArgumentError(
            f"spaces not nested: ({coarse.p},{coarse.r},{coarse.k}) into "
            f"({fine.p},{fine.r},{fine.k})")
    exact = _exact_mu(coarse.p, coarse.r, fine.p, fine.r, fine.k)
    mu = np.array([[float(v) for v in row] for row in exact])
    mu.setflags(write=False)
    return RepresentationMatrix(coarse, fine, mu)


def check_admissible(s: int, p1: int, k: int):
    if s < 1:
        raise InvalidArgumentError(f"smoothness s must be >= 1, got {s}")
    if not s + 1 <= p1 <= 2 * s + 1:
        raise InvalidArgumentError(f"p1={p1} outside [s+1, 2s+1] = [{s + 1}, {2 * s + 1}]")
    bound = max(2 * (s + 1) - p1, 2)
    if k < bound:
        raise InvalidArgumentError(f"k={k} below the admissibility bound k >= {bound}")


@dataclass(frozen=True)
class TruncatedFunction:
    index: int
    coefficients: np.ndarray = field(repr=False)


def _mixed_pair(s, p1, k):
    check_admissible(s, p1, k)
    coarse = UnivariateSpace(p1, p1 - 1, k)
    fine = UnivariateSpace(2 * s + 1, s, k)
    return coarse, fine


def truncate(coarse: UnivariateSpace, fine: UnivariateSpace, s: int, i: int) -> TruncatedFunction:
    if fine.p != 2 * s + 1 or fine.r != s or coarse.r != coarse.p - 1:
        raise InvalidArgumentError("truncation needs p2 = 2s+1, r2 = s and r1 = p1-1")
    check_admissible(s, coarse.p, coarse.k)
    if not 0 <= i < coarse.n:
        raise InvalidArgumentError(f"index {i} outside [0, {coarse.n})")
    col = representation_matrix(coarse, fine).mu[:, i].copy()
    col[:s + 1] = 0.0
    col[fine.n - s - 1:] = 0.0
    return TruncatedFunction(i, col)


@dataclass(frozen=True)
class MixedSpace1D:
    s: int
    coarse: UnivariateSpace
    fine: UnivariateSpace
    groups: dict
    coefficients: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.coefficients.shape[1]

    @property
    def sizes(self) -> tuple[int, int, int]:
        return tuple(len(self.groups[g]) for g in ("S1", "S1bar", "S2"))


def build_mixed_1d(s: int, p1: int, k: int) -> MixedSpace1D:
    """Ordered basis S1, S1bar (left, right), S2 (left, right) as fine coefficients."""
    coarse, fine = _mixed_pair(s, p1, k)
    n1, n2 = coarse.n, fine.n
    mu = representation_matrix(coarse, fine).mu
    groups = {
        "S1": list(range(s + 1, n1 - s - 1)),
        "S1bar": list(range(1, s + 1)) + list(range(n1 - s - 1, n1 - 1)),
        "S2": list(range(s + 1)) + list(range(n2 - s - 1, n2)),
    }
    cols = [mu[:, i] for i in groups["S1"]]
    cols += [truncate(coarse, fine, s, i).coefficients for i in groups["S1bar"]]
    cols += [np.eye(n2)[:, j] for j in groups["S2"]]
    return MixedSpace1D(s, coarse, fine, groups, np.column_stack(cols))


def tensor_rows(space: UnivariateSpace, x1, x2, d1: int = 0, d2: int = 0) -> sp.csr_matrix:
    """Rows: points (x1[q], x2[q]); columns: tensor functions j1 * n + j2."""
    return rowwise_kron(basis_matrix(space, x1, d1), basis_matrix(space, x2, d2))


def rowwise_kron(b1, b2) -> sp.csr_matrix:
    """Face-splitting product: row q is kron(b1[q], b2[q])."""
    b1, b2 = sp.csr_matrix(b1), sp.csr_matrix(b2)
    m = b1.shape[0]
    nnz1 = np.diff(b1.indptr)
    nnz2 = np.diff(b2.indptr)
    if m == 0 or not (np.all(nnz1 == nnz1[0]) and np.all(nnz2 == nnz2[0])):
        return sp.csr_matrix(sp.vstack([sp.kron(b1[q], b2[q]) for q in range(m)]))
    a, b = nnz1[0], nnz2[0]
    cols = (b1.indices.reshape(m, a)[:, :, None] * b2.shape[1]
            + b2.indices.reshape(m, b)[:, None, :]).reshape(m, -1)
    vals = (b1.data.reshape(m, a)[:, :, None] * b2.data.reshape(m, b)[:, None, :]).reshape(m, -1)
    indptr = np.arange(m + 1) * a * b
    return sp.csr_matrix((vals.ravel(), cols.ravel(), indptr),
                         shape=(m, b1.shape[1] * b2.shape[1]))
