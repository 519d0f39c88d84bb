"""Physical derivatives of pulled-back functions on a patch.

``phi_hat = phi o F``. Parametric derivatives up to order three are related to
physical ones by a block lower-triangular linear map per point, built from the
Taylor expansion of ``F``; inverting it yields physical derivatives. An
independent divergence-form evaluation with the matrix
``N = |det J| J^{-1} J^{-T}`` serves as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, InvalidArgumentError
from .univariate import UnivariateSpace, _local_ders

MULTI_INDICES = [(a - b, b) for a in range(1, 4) for b in range(a + 1)]
LAPLACIAN = {(2, 0): 1.0, (0, 2): 1.0}
GRAD_LAPLACIAN = ({(3, 0): 1.0, (1, 2): 1.0}, {(2, 1): 1.0, (0, 3): 1.0})
GRADIENT = ({(1, 0): 1.0}, {(0, 1): 1.0})


def multi_indices(order: int) -> list:
    return [m for m in MULTI_INDICES if sum(m) <= order]


# -- truncated bivariate jets: arrays (npts, L, L), entry [i, j] ~ t1^i t2^j --

def jet_zero(npts: int, L: int) -> np.ndarray:
    return np.zeros((npts, L, L))


def jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    L = a.shape[1]
    out = np.zeros_like(a)
    for i in range(L):
        for j in range(L - i):
            for k in range(i + 1):
                for m in range(j + 1):
                    out[:, i, j] += a[:, k, m] * b[:, i - k, j - m]
    return out


def jet_recip(a: np.ndarray) -> np.ndarray:
    L = a.shape[1]
    a0 = a[:, 0, 0]
    rest = a.copy()
    rest[:, 0, 0] = 0.0
    rest = -rest / a0[:, None, None]
    out = jet_zero(a.shape[0], L)
    out[:, 0, 0] = 1.0
    term = out.copy()
    for _ in range(1, L):
        term = jet_mul(term, rest)
        out = out + term
    return out / a0[:, None, None]


def jet_diff(a: np.ndarray, axis: int) -> np.ndarray:
    """Partial derivative in t_axis (drops the top order)."""
    out = np.zeros_like(a)
    L = a.shape[1]
    for i in range(L):
        for j in range(L - i):
            if axis == 0 and i + 1 < L:
                out[:, i, j] = (i + 1) * a[:, i + 1, j]
            elif axis == 1 and j + 1 < L:
                out[:, i, j] = (j + 1) * a[:, i, j + 1]
    return out


def taylor_jet(derivs: dict, component, L: int) -> np.ndarray:
    """Jet of a function from its derivative table (a, b) -> values."""
    first = next(iter(derivs.values()))
    first = first if component is None else first[..., component]
    out = jet_zero(first.shape[0], L)
    for (a, b), val in derivs.items():
        if a + b < L:
            v = val if component is None else val[..., component]
            out[:, a, b] = v / (factorial(a) * factorial(b))
    return out


# -- chain rule ------------------------------------------------------------

def chain_rule_matrix(geo: dict, order: int) -> np.ndarray:
    """M with parametric = M @ physical derivatives (multi-indices of order 1..order)."""
    idx = multi_indices(order)
    L = order + 1
    npts = geo[0, 0].shape[0]
    dx = []
    for c in range(2):
        j = taylor_jet({k: v for k, v in geo.items() if sum(k) <= order}, c, L)
        j[:, 0, 0] = 0.0
        dx.append(j)
    powers = [[None] * L for _ in range(2)]
    for c in range(2):
        powers[c][0] = jet_zero(npts, L)
        powers[c][0][:, 0, 0] = 1.0
        for e in range(1, L):
            powers[c][e] = jet_mul(powers[c][e - 1], dx[c])
    M = np.zeros((npts, len(idx), len(idx)))
    for col, (a1, a2) in enumerate(idx):
        P = jet_mul(powers[0][a1], powers[1][a2]) / (factorial(a1) * factorial(a2))
        for row, (g1, g2) in enumerate(idx):
            M[:, row, col] = factorial(g1) * factorial(g2) * P[:, g1, g2]
    return M


@dataclass
class PhysicalMap:
    """Per-point data to convert parametric to physical derivatives."""

    order: int
    x: np.ndarray = field(repr=False)
    det: np.ndarray = field(repr=False)
    minv: np.ndarray = field(repr=False)

    def weights(self, combo: dict) -> dict:
        """Parametric derivative weights (gamma -> per-point array) for a physical
        linear combination of derivatives ``combo`` (alpha -> coefficient)."""
        idx = multi_indices(self.order)
        out = {}
        for alpha, c in combo.items():
            if alpha == (0, 0):
                out[0, 0] = out.get((0, 0), 0.0) + c * np.ones(len(self.det))
                continue
            if sum(alpha) > self.order:
                raise InvalidArgumentError(f"derivative {alpha} above order {self.order}")
            row = idx.index(alpha)
            for col, gamma in enumerate(idx):
                w = c * self.minv[:, row, col]
                if np.any(w):
                    out[gamma] = out.get(gamma, 0.0) + w
        return out

    def apply(self, combo: dict, param: dict) -> np.ndarray:
        """Physical combination from parametric derivative values gamma -> array."""
        total = 0.0
        for gamma, w in self.weights(combo).items():
            vals = param[gamma]
            total = total + (w if vals.ndim == 1 else w[:, None]) * vals
        return total


def physical_map(geo: dict, order: int, where: str = "") -> PhysicalMap:
    """Build the per-point inverse chain-rule matrices from geometry derivatives
    ``geo[(a, b)]`` of shape (npts, 2), complete up to ``order``."""
    J = np.stack([geo[1, 0], geo[0, 1]], axis=-1)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if not np.all(np.isfinite(det)) or np.any(np.abs(det) < 1e-14):
        bad = int(np.flatnonzero(~(np.abs(det) >= 1e-14))[0])
        raise AssemblyError(f"degenerate Jacobian at quadrature point {bad}{where}")
    M = chain_rule_matrix(geo, order)
    minv = np.linalg.inv(M)
    if not np.all(np.isfinite(minv)):
        raise AssemblyError(f"non-finite chain-rule inverse{where}")
    return PhysicalMap(order, geo[0, 0], det, minv)


# -- divergence-form oracle --------------------------------------------------

def _n_jet(geo: dict, L: int):
    """Jets of N = |det J| (J^T J)^{-1} = adj(J^T J) / |det J| and of 1/|det J|."""
    # first derivatives of F as jets of order L
    jets = {}
    for (a, b) in [(1, 0), (0, 1)]:
        shifted = {}
        for (p, q), val in geo.items():
            if p >= a and q >= b:
                shifted[p - a, q - b] = val
        jets[a, b] = [taylor_jet(shifted, c, L) for c in range(2)]
    xu, yu = jets[1, 0]
    xv, yv = jets[0, 1]
    det = jet_mul(xu, yv) - jet_mul(xv, yu)
    sign = np.sign(det[:, 0, 0])[:, None, None]
    inv_abs = jet_recip(det * sign)
    g11 = jet_mul(xu, xu) + jet_mul(yu, yu)
    g12 = jet_mul(xu, xv) + jet_mul(yu, yv)
    g22 = jet_mul(xv, xv) + jet_mul(yv, yv)
    N = [[jet_mul(g22, inv_abs), -jet_mul(g12, inv_abs)],
         [-jet_mul(g12, inv_abs), jet_mul(g11, inv_abs)]]
    return N, inv_abs, det * sign


def divergence_form(geo: dict, phi: dict, order: int = 2):
    """Physical Laplacian (order 2) or gradient of the Laplacian (order 3) of
    phi o F^{-1} from parametric derivatives ``phi[(a, b)]`` via
    (1/|det J|) div(N grad phi_hat). Returns (lap, |det J|) or (glap_param, N, |det J|)
    where ``glap_param`` is the parametric gradient of the Laplacian."""
    L = order
    N, inv_abs, absdet = _n_jet(geo, L)
    phi_jet = taylor_jet(phi, None, L + 1)
    grad = [jet_diff(phi_jet, 0)[:, :L, :L], jet_diff(phi_jet, 1)[:, :L, :L]]
    flux = [jet_mul(N[i][0], grad[0]) + jet_mul(N[i][1], grad[1]) for i in range(2)]
    div = np.zeros_like(flux[0])
    div[:, :L - 1, :L - 1] = (jet_diff(flux[0], 0) + jet_diff(flux[1], 1))[:, :L - 1, :L - 1]
    lap = jet_mul(inv_abs[:, :L, :L], div)
    if order == 2:
        return lap[:, 0, 0], absdet[:, 0, 0]
    g = np.stack([lap[:, 1, 0], lap[:, 0, 1]], axis=-1)
    Nmat = np.array([[N[0][0][:, 0, 0], N[0][1][:, 0, 0]], [N[1][0][:, 0, 0], N[1][1][:, 0, 0]]])
    return g, np.moveaxis(Nmat, -1, 0), absdet[:, 0, 0]


# -- sparse operators on tensor spaces -------------------------------------

def tensor_operator(space: UnivariateSpace, x1, x2, weights: dict, grid: bool = True):
    """Sparse rows of sum_gamma w_gamma * d^gamma B_j at points.

    With ``grid`` the points are the tensor grid x1 x x2 (x1 slow) and every
    weight has length len(x1) * len(x2); otherwise points are (x1[q], x2[q]).
    """
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    nd = max(max(g) for g in weights)
    d1, mu1 = _local_ders(space, x1, nd)
    d2, mu2 = _local_ders(space, x2, nd)
    p, n = space.p, space.n
    loc = np.arange(p + 1)
    c1 = mu1[:, None] - p + loc
    c2 = mu2[:, None] - p + loc
    if grid:
        m1, m2 = len(x1), len(x2)
        data = np.zeros((m1, m2, p + 1, p + 1))
        for (g1, g2), w in weights.items():
            w = np.broadcast_to(np.asarray(w, dtype=float), (m1 * m2,)).reshape(m1, m2)
            data += w[:, :, None, None] * d1[:, None, g1, :, None] * d2[None, :, g2, None, :]
        cols = np.broadcast_to(c1[:, None, :, None] * n + c2[None, :, None, :], data.shape)
        npts = m1 * m2
    else:
        data = np.zeros((len(x1), p + 1, p + 1))
        for (g1, g2), w in weights.items():
            w = np.broadcast_to(np.asarray(w, dtype=float), (len(x1),))
            data += w[:, None, None] * d1[:, g1, :, None] * d2[:, g2, None, :]
        cols = c1[:, :, None] * n + c2[:, None, :]
        npts = len(x1)
    indptr = np.arange(npts + 1) * (p + 1) ** 2
    return sp.csr_matrix((data.ravel(), np.ascontiguousarray(cols).ravel(), indptr),
                         shape=(npts, n * n))
