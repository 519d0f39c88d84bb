"""Pointwise evaluation of the edge-trace recursion with truncated Taylor jets.

A jet is a list of arrays ``J[q]`` holding the q-th Taylor coefficient
(derivative / q!) at each sample point; arrays are shaped (npts, ncols) so the
same code handles numeric values (ncols = 1) and linear functionals over
control coefficients (ncols = number of unknowns).
"""
from __future__ import annotations

from math import comb, factorial

import numpy as np

from .errors import DegenerateGeometryError


def poly_jet(poly, v, length):
    """Taylor jet of a numpy Polynomial at the points v."""
    out = []
    d = poly
    for q in range(length):
        out.append((d(v) / factorial(q))[:, None])
        d = d.deriv()
    return out


def jet_mul(a, b):
    n = min(len(a), len(b))
    return [sum(a[i] * b[q - i] for i in range(q + 1)) for q in range(n)]


def jet_recip(a):
    if np.any(np.abs(a[0]) < 1e-14):
        raise DegenerateGeometryError("gluing function alpha vanishes on the edge")
    out = [1.0 / a[0]]
    for q in range(1, len(a)):
        out.append(-sum(a[i] * out[q - i] for i in range(1, q + 1)) / a[0])
    return out


def jet_deriv(a, n):
    """Jet of the n-th derivative (shorter by n)."""
    return [a[q + n] * (factorial(q + n) / factorial(q)) for q in range(len(a) - n)]


def jet_pow(a, e):
    out = [np.ones_like(a[0])] + [np.zeros_like(a[0])] * (len(a) - 1)
    for _ in range(e):
        out = jet_mul(out, a)
    return out


def trace_values(cross, alpha, beta, v, s):
    """Evaluate f_0..f_s at points v.

    ``cross[m][q]`` is the (npts, ncols) array of d^m/du^m d^q/dv^q f at (0, v)
    for m, q <= s; ``alpha`` and ``beta`` are numpy Polynomials.
    """
    v = np.asarray(v, dtype=float)
    L = s + 1
    inv_a = jet_recip(poly_jet(alpha, v, L))
    b_over_a = jet_mul(poly_jet(beta, v, L), inv_a)
    f = []
    for ell in range(L):
        base = [cross[ell][q] / factorial(q) for q in range(L)]
        fl = jet_mul(jet_pow(inv_a, ell), base)
        for j in range(ell):
            term = jet_mul(jet_pow(b_over_a, ell - j), jet_deriv(f[j], ell - j))
            c = comb(ell, j)
            fl = [fl[q] - c * term[q] for q in range(len(term))] + fl[len(term):]
        f.append(fl[:L - ell])
    return [fl[0] for fl in f]
