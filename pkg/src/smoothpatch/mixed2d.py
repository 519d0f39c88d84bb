"""Bivariate mixed degree and regularity space S1 + S1bar + S2 on the unit square."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgumentError
from .univariate import (UnivariateSpace, check_admissible, representation_matrix,
                         tensor_rows, truncate)


@dataclass(frozen=True)
class MixedBasisId:
    group: str
    j1: int
    j2: int


def mixed_dimension(s: int, p1: int, k: int) -> int:
    return 4 * (s + 1) ** 2 * (k + 1) + (k + s) ** 2 + (p1 - (s + 1)) * (p1 + 2 * k + s - 1)


def _enumerate(s, n1, n2):
    lo1, hi1 = s + 1, n1 - s - 2
    bands1 = list(range(1, s + 1)), list(range(n1 - s - 1, n1 - 1))
    inner1 = range(lo1, hi1 + 1)
    ids = [MixedBasisId("S1", a, b) for a in inner1 for b in inner1]
    for band in bands1:
        ids += [MixedBasisId("S1bar", a, b) for a in band for b in range(1, n1 - 1)]
    for band in bands1:
        ids += [MixedBasisId("S1bar", a, b) for a in inner1 for b in band]
    bands2 = list(range(s + 1)), list(range(n2 - s - 1, n2))
    for band in bands2:
        ids += [MixedBasisId("S2", a, b) for a in band for b in range(n2)]
    for band in bands2:
        ids += [MixedBasisId("S2", a, b) for a in range(s + 1, n2 - s - 1) for b in band]
    return ids


@dataclass(frozen=True, eq=False)
class MixedSpace2D:
    s: int
    p1: int
    k: int
    basis: tuple = field(repr=False)
    coarse: UnivariateSpace = field(repr=False)
    fine: UnivariateSpace = field(repr=False)
    mu: np.ndarray = field(repr=False)
    truncated: np.ndarray = field(repr=False)

    @property
    def r1(self):
        return self.p1 - 1

    @property
    def p2(self):
        return 2 * self.s + 1

    @property
    def r2(self):
        return self.s

    @property
    def h(self):
        return 1.0 / (self.k + 1)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def block_sizes(self) -> dict:
        out = {"S1": 0, "S1bar": 0, "S2": 0}
        for b in self.basis:
            out[b.group] += 1
        return out

    def factor(self, group: str, j: int) -> np.ndarray:
        """Univariate fine coefficients of one tensor factor."""
        if group == "S1":
            return self.mu[:, j]
        if group == "S1bar":
            return self.truncated[:, j]
        return np.eye(self.fine.n)[:, j]

    @cached_property
    def coefficient_matrix(self) -> sp.csc_matrix:
        """Sparse (n2^2, dim) matrix whose columns are fine coefficients,
        fine index j1 * n2 + j2."""
        n2 = self.fine.n
        rows, cols, vals = [], [], []
        for c, b in enumerate(self.basis):
            f1 = self.factor(b.group, b.j1)
            f2 = self.factor(b.group, b.j2)
            i1, i2 = np.flatnonzero(f1), np.flatnonzero(f2)
            block = np.outer(f1[i1], f2[i2])
            rows.append((i1[:, None] * n2 + i2[None, :]).ravel())
            cols.append(np.full(block.size, c))
            vals.append(block.ravel())
        return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n2 * n2, self.dim))


def build_mixed_2d(s: int, p1: int, k: int) -> MixedSpace2D:
    check_admissible(s, p1, k)
    if k == 1 and p1 == 2 * s + 1:
        raise InvalidArgumentError("k = 1 with p1 = 2s+1 is excluded")
    coarse = UnivariateSpace(p1, p1 - 1, k)
    fine = UnivariateSpace(2 * s + 1, s, k)
    mu = representation_matrix(coarse, fine).mu
    trunc = np.column_stack([truncate(coarse, fine, s, i).coefficients for i in range(coarse.n)])
    basis = tuple(_enumerate(s, coarse.n, fine.n))
    return MixedSpace2D(s, p1, k, basis, coarse, fine, mu, trunc)


def fine_coeffs(space: MixedSpace2D, b) -> np.ndarray:
    """Fine tensor coefficients of basis member ``b`` (id or position) as an (n2, n2) array."""
    if not isinstance(b, MixedBasisId):
        b = space.basis[b]
    return np.outer(space.factor(b.group, b.j1), space.factor(b.group, b.j2))


def fine_values(space: MixedSpace2D, x1, x2, d1=0, d2=0) -> sp.csr_matrix:
    """Rows: points (x1[q], x2[q]); columns: fine tensor functions j1 * n2 + j2."""
    if d1 + d2 > space.s + 3:
        raise InvalidArgumentError(f"derivative order {d1 + d2} exceeds s+3 = {space.s + 3}")
    return tensor_rows(space.fine, x1, x2, d1, d2)


def eval_mixed(space: MixedSpace2D, b, point, d1: int = 0, d2: int = 0) -> float:
    x1, x2 = point
    if not (0 <= x1 <= 1 and 0 <= x2 <= 1):
        raise InvalidArgumentError(f"point {point} outside the unit square")
    row = fine_values(space, [x1], [x2], d1, d2)
    return float((row @ fine_coeffs(space, b).ravel())[0])


def eval_all(space: MixedSpace2D, x1, x2, d1=0, d2=0) -> np.ndarray:
    """Dense (npts, dim) values of every basis member."""
    return np.asarray((fine_values(space, x1, x2, d1, d2) @ space.coefficient_matrix).todense())


def project_into_mixed(space: MixedSpace2D, target, samples: int = 23):
    """Express coarse tensor splines in the mixed basis.

    ``target`` holds coarse coefficients, shape (n1, n1) or a stack (m, n1, n1).
    Returns the mixed coefficients and the max-norm residual over a sample grid
    (per target when stacked).
    """
    n1 = space.coarse.n
    target = np.asarray(target, dtype=float)
    single = target.ndim <= 2
    target = target.reshape(-1, n1, n1)
    fine_target = np.einsum("ia,mab,jb->ijm", space.mu, target, space.mu).reshape(-1, len(target))
    C = space.coefficient_matrix
    if C.shape[0] <= 4000:
        coef = scipy.linalg.lstsq(C.toarray(), fine_target, lapack_driver="gelsd")[0]
    else:
        coef = spla.splu((C.T @ C).tocsc()).solve(np.asarray(C.T @ fine_target))
    x = np.linspace(0.0, 1.0, samples)
    X1, X2 = (a.ravel() for a in np.meshgrid(x, x, indexing="ij"))
    want = tensor_rows(space.coarse, X1, X2) @ target.reshape(len(target), -1).T
    got = fine_values(space, X1, X2) @ (C @ coef)
    residual = np.max(np.abs(got - want), axis=0)
    if single:
        return coef[:, 0], float(residual[0])
    return coef.T, residual
