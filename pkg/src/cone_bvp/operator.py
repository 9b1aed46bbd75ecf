"""phi, its inverse, the root map Theta and the fixed-point operator T.

For a component i with forcing mass F(t) = int_0^t f^i(tau, u(tau)) dtau,

    L(c) = int_0^c (1/p(s)) phi^-1((F(c) - F(s)) / q(s)) ds
    R(c) = int_c^1 (1/p(s)) phi^-1((F(s) - F(c)) / q(s)) ds

Theta(c) = L(c) - R(c) is nondecreasing, sigma is its root, and (T^i u)(t)
is the left integral up to t for t <= sigma and the right integral from t
for t >= sigma. Both integrals are assembled cell by cell with 5-point
Gauss-Legendre, splitting the cell that contains the pivot.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .expr import Expr, evaluate, variables
from .problem import ProblemSpec
from .quadrature import GL_NODES, GL_WEIGHTS, CellRule, GridFunction, cumulative, grid_nodes, \
    sample_between

SIGMA_TOL = 1e-12
SIGMA_MAX_ITER = 80


class DegenerateForcingError(ValueError):
    """Theta has no sign change: the forcing vanishes along u."""


def phi(x, p: float):
    """|x|^(p-2) x, with phi(0) = 0 for every p > 1."""
    x_arr = np.asarray(x, dtype=float)
    out = np.sign(x_arr) * np.abs(x_arr) ** (p - 1.0)
    return float(out) if out.ndim == 0 else out


def phi_inv(y, p: float):
    """sign(y) |y|^(1/(p-1)), the inverse of :func:`phi`."""
    y_arr = np.asarray(y, dtype=float)
    out = np.sign(y_arr) * np.abs(y_arr) ** (1.0 / (p - 1.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class _Weights:
    rule: CellRule
    inv_p: np.ndarray
    inv_q: np.ndarray


def _reciprocal(ast: Expr, x: np.ndarray, name: str) -> np.ndarray:
    v = np.broadcast_to(np.asarray(evaluate(ast, x), dtype=float), x.shape)
    if np.any(v <= 0):
        raise ValueError(f"{name}(t) must be strictly positive")
    return 1.0 / v


def _constant_reciprocal(ast: Expr) -> float | None:
    if variables(ast):
        return None
    v = evaluate(ast, 0.0)
    if v <= 0:
        raise ValueError("weights must be strictly positive")
    return 1.0 / v


@lru_cache(maxsize=64)
def _weights(weight_p: Expr, weight_q: Expr, N: int, lo: float, hi: float) -> _Weights:
    nodes = grid_nodes(N)
    inner = nodes[(nodes > lo) & (nodes < hi)]
    rule = CellRule(np.concatenate([[lo], inner, [hi]]))
    return _Weights(rule, _reciprocal(weight_p, rule.points, "p"),
                    _reciprocal(weight_q, rule.points, "q"))


class PivotIntegrals:
    """Left/right integrals of (1/p) phi^-1(inner mass / q) about a movable pivot.

    ``F`` is a cumulative table of the (nonnegative) density; the integrals run
    over [lo, c] and [c, hi].
    """

    def __init__(self, spec: ProblemSpec, F: GridFunction, lo: float = 0.0, hi: float = 1.0):
        w = _weights(spec.weight_p, spec.weight_q, F.N, lo, hi)
        self.spec = spec
        self.F = F
        self.lo, self.hi = lo, hi
        self.expo = 1.0 / (spec.phi_exponent - 1.0)
        self.breaks = w.rule.breaks
        self.wp = w.rule.weights * w.inv_p
        self.inv_q = w.inv_q
        self.F_pts = sample_between(F, w.rule.points)
        self._inv_p_const = _constant_reciprocal(spec.weight_p)
        self._inv_q_const = _constant_reciprocal(spec.weight_q)

    def locate(self, c: float) -> int:
        k = int(np.searchsorted(self.breaks, c, side="right")) - 1
        return min(max(k, 0), self.breaks.size - 2)

    def _kernel(self, mass, inv_q):
        y = np.maximum(mass, 0.0) * inv_q
        if self.expo == 1.0:
            return y
        if self.expo == 0.5:
            return np.sqrt(y)
        if self.expo == 2.0:
            return y * y
        return y ** self.expo

    def partials(self, c: float, k: int, Fc: float) -> tuple[float, float]:
        """Integrals over the split pieces [breaks[k], c] and [c, breaks[k+1]] of cell ``k``."""
        a, b = self.breaks[k], self.breaks[k + 1]
        halves = np.array([0.5 * (c - a), 0.5 * (b - c)])
        x = (np.array([0.5 * (a + c), 0.5 * (c + b)])[:, None] + halves[:, None] * GL_NODES).ravel()
        inv_p = self._inv_p_const or _reciprocal(self.spec.weight_p, x, "p")
        inv_q = self._inv_q_const or _reciprocal(self.spec.weight_q, x, "q")
        # both pieces lie in one spline cell
        coef = self.F._spline.c
        j = min(int(0.5 * (a + b) * self.F.N), self.F.N - 1)
        dx = x - j / self.F.N
        Fx = ((coef[0, j] * dx + coef[1, j]) * dx + coef[2, j]) * dx + coef[3, j]
        sign = np.repeat([1.0, -1.0], GL_NODES.size)
        vals = (inv_p * self._kernel(sign * (Fc - Fx), inv_q)).reshape(2, -1) @ GL_WEIGHTS
        return float(halves[0] * vals[0]), float(halves[1] * vals[1])

    def left_cells(self, c: float, k: int, Fc: float) -> np.ndarray:
        """Per-cell left integrals for the full cells before cell ``k``."""
        return np.sum(self.wp[:k] * self._kernel(Fc - self.F_pts[:k], self.inv_q[:k]), axis=1)

    def right_cells(self, c: float, k: int, Fc: float) -> np.ndarray:
        """Per-cell right integrals for the full cells after cell ``k``."""
        return np.sum(self.wp[k + 1:] * self._kernel(self.F_pts[k + 1:] - Fc,
                                                     self.inv_q[k + 1:]), axis=1)

    def split(self, c: float) -> tuple[float, float]:
        """(L(c), R(c))."""
        if not self.lo <= c <= self.hi:
            raise ValueError(f"pivot {c} outside [{self.lo}, {self.hi}]")
        k = self.locate(c)
        Fc = sample_between(self.F, c)
        head, tail = self.partials(c, k, Fc)
        left = self.left_cells(c, k, Fc).sum() + head
        right = self.right_cells(c, k, Fc).sum() + tail
        return float(left), float(right)

    def theta(self, c: float) -> float:
        left, right = self.split(c)
        return left - right

    def theta_at_break(self, j: int) -> float:
        """Theta at breakpoint ``j``; needs only the precomputed cell data."""
        Fc = sample_between(self.F, self.breaks[j])
        left = self.left_cells(self.breaks[j], j, Fc).sum()
        right = self.right_cells(self.breaks[j], j - 1, Fc).sum()
        return float(left - right)

    def root(self, tol: float = SIGMA_TOL, max_iter: int = SIGMA_MAX_ITER) -> float:
        """Bisection for the root of Theta: over breakpoints first, then inside the bracketing cell.

        Raises:
            DegenerateForcingError: Theta does not change sign.
        """
        m = self.breaks.size - 1
        f_lo, f_hi = self.theta_at_break(0), self.theta_at_break(m)
        if not (f_lo < 0.0 < f_hi):
            raise DegenerateForcingError(f"no sign change: theta(lo)={f_lo}, theta(hi)={f_hi}")
        zero = 1e-14 * max(-f_lo, f_hi)
        a, b, used = 0, m, 0
        while b - a > 1:
            j = (a + b) // 2
            f_j = self.theta_at_break(j)
            used += 1
            if abs(f_j) <= zero:
                break
            if f_j < 0:
                a = j
            else:
                b = j
        return bisect_increasing(self.theta, self.breaks[a], self.breaks[b], tol,
                                 max_iter - used, zero=zero, signs_known=True)


def forcing_table(spec: ProblemSpec, i: int, u: Sequence[GridFunction]) -> GridFunction:
    """Cumulative mass of f^i(t, u(t)); f is sampled at the nodes and spline-interpolated."""
    N = _grid_of(u)
    nodes = grid_nodes(N)
    values = np.broadcast_to(spec.forcing(i, nodes, [c.values for c in u]), nodes.shape)
    return cumulative(GridFunction(values), N, tag=f"F{i + 1}")


def _grid_of(u: Sequence[GridFunction]) -> int:
    sizes = {c.N for c in u}
    if len(sizes) != 1:
        raise ValueError("all components must share one grid")
    return sizes.pop()


def _check_input(spec: ProblemSpec, u: Sequence[GridFunction]):
    if len(u) != spec.n:
        raise ValueError(f"expected {spec.n} components, got {len(u)}")
    for c in u:
        if c.values.min() < 0:
            raise ValueError("operator input must be nonnegative")


def theta(spec: ProblemSpec, i: int, u: Sequence[GridFunction], t: float) -> float:
    """Theta^i u(t) = L(t) - R(t)."""
    _check_input(spec, u)
    return PivotIntegrals(spec, forcing_table(spec, i, u)).theta(t)


def bisect_increasing(fn, lo: float, hi: float, tol: float = SIGMA_TOL,
                      max_iter: int = SIGMA_MAX_ITER, zero: float | None = None,
                      signs_known: bool = False) -> float:
    """Root of a nondecreasing ``fn`` with fn(lo) < 0 < fn(hi).

    Values within ``zero`` of 0 count as zero; if the search lands on such a
    flat stretch, the midpoint of the stretch is returned.
    """
    if not signs_known or zero is None:
        f_lo, f_hi = fn(lo), fn(hi)
        if not (f_lo < 0.0 < f_hi):
            raise DegenerateForcingError(f"no sign change: theta({lo})={f_lo}, theta({hi})={f_hi}")
        if zero is None:
            zero = 1e-14 * max(-f_lo, f_hi)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if abs(f_mid) <= zero:
            a = _edge(lambda c: fn(c) < -zero, lo, mid, tol)
            b = _edge(lambda c: fn(c) <= zero, mid, hi, tol)
            return 0.5 * (a + b)
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _edge(below, lo: float, hi: float, tol: float) -> float:
    # below(lo) is True, below(hi) is False: locate the switch
    for _ in range(SIGMA_MAX_ITER):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if below(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_sigma(spec: ProblemSpec, i: int, u: Sequence[GridFunction],
               tol: float = SIGMA_TOL) -> float:
    """Root sigma_i in (0, 1) of Theta^i u by bisection.

    Raises:
        DegenerateForcingError: Theta does not change sign (f^i vanishes along u).
    """
    _check_input(spec, u)
    return PivotIntegrals(spec, forcing_table(spec, i, u)).root(tol)


@dataclass(frozen=True)
class ComponentImage:
    image: GridFunction
    sigma: float
    mismatch: float  # |left branch - right branch| at sigma
    peak: float  # (T^i u)(sigma)
    degenerate: bool = False


@dataclass(frozen=True)
class OperatorOutput:
    components: tuple[ComponentImage, ...]

    @property
    def images(self) -> list[GridFunction]:
        return [c.image for c in self.components]

    @property
    def sigmas(self) -> list[float]:
        return [c.sigma for c in self.components]

    @property
    def norm(self) -> float:
        return max(c.image.sup for c in self.components)


def image_component(spec: ProblemSpec, i: int, u: Sequence[GridFunction],
                    tol: float = SIGMA_TOL) -> ComponentImage:
    N = _grid_of(u)
    F = forcing_table(spec, i, u)
    pivots = PivotIntegrals(spec, F)
    try:
        sigma = pivots.root(tol)
    except DegenerateForcingError:
        if np.any(F.values != 0):
            raise
        return ComponentImage(GridFunction(np.zeros(N + 1), f"T{i + 1}"), 0.5, 0.0, 0.0, True)
    k = pivots.locate(sigma)
    Fs = sample_between(F, sigma)
    left = pivots.left_cells(sigma, k, Fs)
    right = pivots.right_cells(sigma, k, Fs)
    values = np.empty(N + 1)
    values[: k + 1] = np.concatenate([[0.0], np.cumsum(left)])
    values[k + 1:] = np.concatenate([np.cumsum(right[::-1])[::-1], [0.0]])
    head, tail = pivots.partials(sigma, k, Fs)
    peak_left = values[k] + head
    peak_right = values[k + 1] + tail
    return ComponentImage(GridFunction(values, f"T{i + 1}"), sigma,
                          abs(peak_left - peak_right), peak_left)


def apply_T(spec: ProblemSpec, u: Sequence[GridFunction], tol: float = SIGMA_TOL) -> OperatorOutput:
    """Evaluate T u = (T^1 u, ..., T^n u) on the grid of ``u``."""
    _check_input(spec, u)
    return OperatorOutput(tuple(image_component(spec, i, u, tol) for i in range(spec.n)))
