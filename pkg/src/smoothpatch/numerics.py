"""Quadrature, kernels, sparse SPD solves and weighted least squares."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgumentError, SingularSystemError

KERNEL_TOL = 1e-9


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """Gauss-Legendre rule with ``n`` points mapped to ``[a, b]``."""
    if n < 1:
        raise InvalidArgumentError(f"point count must be >= 1, got {n}")
    if not a < b:
        raise InvalidArgumentError(f"empty interval [{a}, {b}]")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return QuadratureRule(nodes=0.5 * (a + b) + half * x, weights=half * w)


def composite_gauss(breaks, n: int) -> QuadratureRule:
    """Tensor of ``n``-point rules over consecutive intervals of ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = np.polynomial.legendre.leggauss(n)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
    weights = 0.5 * (hi - lo) * w
    return QuadratureRule(nodes=nodes.ravel(), weights=weights.ravel())


def nullspace(M, tol: float = KERNEL_TOL) -> np.ndarray:
    """Orthonormal kernel basis (as columns) via SVD with a relative threshold."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    ncols = M.shape[1]
    if M.size == 0 or not np.any(M):
        return np.eye(ncols)
    _, sv, vt = scipy.linalg.svd(M, full_matrices=True, lapack_driver="gesvd")
    rank = int(np.sum(sv > tol * sv[0]))
    return vt[rank:].T.copy()


def constrained_basis(C, d, tol: float = KERNEL_TOL):
    """Particular solution and kernel basis of C x = d from one truncated SVD."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    u, sv, vt = scipy.linalg.svd(C, full_matrices=True, lapack_driver="gesvd")
    rank = int(np.sum(sv > tol * sv[0])) if sv.size and sv[0] > 0 else 0
    xp = vt[:rank].T @ ((u[:, :rank].T @ d) / (sv[:rank] if d.ndim == 1 else sv[:rank, None]))
    return xp, vt[rank:].T.copy()


def spectral_gap(M, tol: float = KERNEL_TOL) -> float:
    """Ratio between the smallest kept and the largest discarded singular value."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0 or not np.any(M):
        return np.inf
    sv = scipy.linalg.svdvals(M)
    sv = np.concatenate([sv, np.zeros(max(0, M.shape[1] - len(sv)))])
    kept = sv[sv > tol * sv[0]]
    dropped = sv[sv <= tol * sv[0]]
    if len(dropped) == 0 or dropped[0] == 0.0:
        return np.inf
    return kept[-1] / dropped[0]


def symmetrize(S) -> sp.csr_matrix:
    """Exactly symmetric CSR copy without stored zeros."""
    S = sp.csr_matrix(S)
    S = (S + S.T) * 0.5
    S = sp.csr_matrix(S)
    S.eliminate_zeros()
    S.sort_indices()
    return S


def solve_spd(S, b) -> np.ndarray:
    """Direct solve of a sparse symmetric positive definite system.

    The matrix is symmetrically scaled to unit diagonal, then factored with a
    symmetric fill-reducing ordering and pivoting disabled, so the diagonal of
    ``U`` carries the LDL^T pivots. A non-positive pivot means the matrix is not
    positive definite.
    """
    b = np.asarray(b, dtype=float)
    S = sp.csc_matrix(S)
    n = S.shape[0]
    if n == 0:
        return np.zeros_like(b)
    diag = S.diagonal()
    if np.any(~(diag > 0)):
        idx = int(np.flatnonzero(~(diag > 0))[0])
        raise SingularSystemError(f"non-positive diagonal {diag[idx]:.3e} at unknown {idx}", index=idx)
    d = sp.diags(1.0 / np.sqrt(diag))
    A = sp.csc_matrix(d @ S @ d)
    lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    piv = lu.U.diagonal()
    bad = np.flatnonzero(~(piv > 1e-15))
    if bad.size:
        idx = int(np.flatnonzero(lu.perm_c == bad[0])[0])
        raise SingularSystemError(
            f"non-positive pivot {piv[bad[0]]:.3e} at unknown {idx}", index=idx)
    scale = 1.0 / np.sqrt(diag)
    return scale[:, None] * lu.solve(scale[:, None] * b) if b.ndim == 2 else scale * lu.solve(scale * b)


def weighted_lstsq(A, b, w) -> np.ndarray:
    """Minimum-norm minimizer of sum_i w_i (A_i x - b_i)^2."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise InvalidArgumentError("weights must be nonnegative")
    if not np.any(w > 0):
        raise InvalidArgumentError("at least one row needs a positive weight")
    sw = np.sqrt(w)
    Aw = A * sw[:, None]
    bw = b * (sw if b.ndim == 1 else sw[:, None])
    x, _, rank, _ = scipy.linalg.lstsq(Aw, bw, cond=1e-13, lapack_driver="gelsd")
    if rank < A.shape[1]:
        warnings.warn(f"rank-deficient least-squares fit ({rank} < {A.shape[1]}); "
                      "returning the minimum-norm solution", RuntimeWarning, stacklevel=2)
    return x
