"""Exact scalar fields with symbolic derivatives for manufactured solutions."""
from __future__ import annotations

from functools import cached_property, lru_cache

import numpy as np
import sympy

from .errors import InvalidArgumentError

X, Y = sympy.symbols("x y", real=True)
DEFAULT_SOLUTION = "cos(x)*sin(y)"


def _laplace(e):
    return sympy.diff(e, X, 2) + sympy.diff(e, Y, 2)


class ExactField:
    """A smooth field u(x, y) given as a sympy expression or a string."""

    def __init__(self, expr=DEFAULT_SOLUTION):
        if isinstance(expr, str):
            try:
                expr = sympy.sympify(expr, locals={"x": X, "y": Y})
            except (sympy.SympifyError, SyntaxError) as exc:
                raise InvalidArgumentError(f"cannot parse field {expr!r}") from exc
        free = expr.free_symbols - {X, Y}
        if free:
            raise InvalidArgumentError(f"unexpected symbols {sorted(map(str, free))}")
        self.expr = expr

    def __repr__(self):
        return f"ExactField({self.expr})"

    @lru_cache(maxsize=None)
    def _compiled(self, a: int, b: int):
        e = self.expr
        if a:
            e = sympy.diff(e, X, a)
        if b:
            e = sympy.diff(e, Y, b)
        return sympy.lambdify((X, Y), e, "numpy")

    @staticmethod
    def _call(f, x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(f(x, np.asarray(y, dtype=float)), dtype=float),
                               np.broadcast(x, y).shape).copy()

    def __call__(self, x, y):
        return self.derivative(x, y, 0, 0)

    def derivative(self, x, y, a: int = 0, b: int = 0):
        return self._call(self._compiled(a, b), x, y)

    @cached_property
    def _lap(self):
        return sympy.lambdify((X, Y), _laplace(self.expr), "numpy")

    @cached_property
    def _grad_lap(self):
        lap = _laplace(self.expr)
        return (sympy.lambdify((X, Y), sympy.diff(lap, X), "numpy"),
                sympy.lambdify((X, Y), sympy.diff(lap, Y), "numpy"))

    def laplacian(self, x, y):
        return self._call(self._lap, x, y)

    def gradient(self, x, y):
        return np.stack([self.derivative(x, y, 1, 0), self.derivative(x, y, 0, 1)], axis=-1)

    def grad_laplacian(self, x, y):
        return np.stack([self._call(f, x, y) for f in self._grad_lap], axis=-1)

    @lru_cache(maxsize=None)
    def _source(self, pde: str):
        if pde == "biharmonic":
            e = _laplace(_laplace(self.expr))
        elif pde == "triharmonic":
            e = -_laplace(_laplace(_laplace(self.expr)))
        else:
            raise InvalidArgumentError(f"unknown pde {pde!r}")
        return sympy.lambdify((X, Y), sympy.simplify(e), "numpy")

    def source(self, pde: str):
        """Right-hand side g with Delta^2 u = g or Delta^3 u = -g."""
        f = self._source(pde)
        return lambda x, y: self._call(f, x, y)
