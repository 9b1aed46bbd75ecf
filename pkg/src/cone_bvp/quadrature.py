"""Composite Gauss-Legendre quadrature and cumulative-integral tables on [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

GL_ORDER = 5
GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)

DEFAULT_GRID = 512


def check_grid(N: int) -> int:
    if int(N) != N or N < 16 or N % 2:
        raise ValueError(f"grid size must be an even integer >= 16, got {N}")
    return int(N)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Node values of a real function on the uniform grid t_j = j/N."""

    values: np.ndarray
    tag: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("grid values must be one-dimensional")
        check_grid(values.size - 1)
        if not np.all(np.isfinite(values)):
            raise ValueError("grid values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def N(self) -> int:
        return self.values.size - 1

    @cached_property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.N)

    @property
    def sup(self) -> float:
        """Sup norm |u|_0 over the nodes."""
        return float(np.max(np.abs(self.values)))

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.nodes, self.values)

    def __call__(self, s):
        return sample_between(self, s)


def grid_nodes(N: int) -> np.ndarray:
    return np.arange(N + 1) / N


class CellRule:
    """Gauss-Legendre points and weights on the cells between consecutive breakpoints."""

    def __init__(self, breaks: np.ndarray):
        breaks = np.asarray(breaks, dtype=float)
        self.breaks = breaks
        half = 0.5 * np.diff(breaks)
        mid = 0.5 * (breaks[:-1] + breaks[1:])
        self.points = mid[:, None] + half[:, None] * GL_NODES
        self.weights = half[:, None] * GL_WEIGHTS

    @property
    def cells(self) -> int:
        return self.breaks.size - 1


def _values(f: Callable, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)


def integrate(f: Callable, a: float, b: float, panels: int = DEFAULT_GRID) -> float:
    """Composite 5-point Gauss-Legendre integral of ``f`` over [a, b].

    ``f`` must accept an ndarray of abscissae; a scalar return is broadcast.
    """
    if not 0.0 <= a <= b <= 1.0:
        raise ValueError(f"need 0 <= a <= b <= 1, got a={a}, b={b}")
    if panels < 1:
        raise ValueError("panels must be >= 1")
    if a == b:
        return 0.0
    rule = CellRule(np.linspace(a, b, panels + 1))
    return float(np.sum(rule.weights * _values(f, rule.points)))


def cell_integrals(f: Callable, N: int) -> np.ndarray:
    rule = CellRule(grid_nodes(N))
    return np.sum(rule.weights * _values(f, rule.points), axis=1)


def cumulative(f: Callable, N: int = DEFAULT_GRID, tag: str | None = None) -> GridFunction:
    """Table of F(t_j) = integral of ``f`` over [0, t_j], one Gauss-Legendre panel per grid cell."""
    check_grid(N)
    return GridFunction(np.concatenate([[0.0], np.cumsum(cell_integrals(f, N))]), tag)


def sample_between(F: GridFunction, s):
    """Cubic-spline interpolation of the table ``F`` at ``s`` in [0, 1]; exact at nodes."""
    N = F.N
    coef = F._spline.c
    if np.ndim(s) == 0:
        x = float(s)
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"sample point {x} outside [0, 1]")
        jn = round(x * N)
        if jn / N == x:
            return float(F.values[jn])
        j = min(int(x * N), N - 1)
        dx = x - j / N
        return float(((coef[0, j] * dx + coef[1, j]) * dx + coef[2, j]) * dx + coef[3, j])
    s_arr = np.asarray(s, dtype=float)
    if not (s_arr.min() >= 0.0 and s_arr.max() <= 1.0):
        raise ValueError("sample point outside [0, 1]")
    j = np.minimum((s_arr * N).astype(int), N - 1)
    dx = s_arr - j / N
    out = ((coef[0, j] * dx + coef[1, j]) * dx + coef[2, j]) * dx + coef[3, j]
    # pin node hits to the stored values
    jn = np.rint(s_arr * N).astype(int)
    out = np.where(jn / N == s_arr, F.values[jn], out)
    return float(out) if out.ndim == 0 else out
