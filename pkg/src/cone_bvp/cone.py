"""The cone K, its constant rho, and the Harnack-type lower bound on [1/4, 3/4]."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import evaluate
from .problem import ProblemSpec
from .quadrature import DEFAULT_GRID, GridFunction, cumulative, integrate, sample_between

WINDOW = (0.25, 0.75)


class WeightError(ValueError):
    """The weight p(t) is not strictly positive."""


@dataclass(frozen=True)
class ConeData:
    rho: float
    inv_p: GridFunction  # cumulative integral of 1/p
    total: float  # P = integral of 1/p over [0, 1]

    def rho_from_table(self) -> float:
        head = sample_between(self.inv_p, WINDOW[0])
        tail = self.total - sample_between(self.inv_p, WINDOW[1])
        return min(head, tail) / self.total


def _reciprocal_p(spec: ProblemSpec):
    def inv(t):
        pv = np.asarray(evaluate(spec.weight_p, t), dtype=float)
        if np.any(pv <= 0):
            raise WeightError("p(t) must be strictly positive")
        return 1.0 / pv

    return inv


def compute_rho(spec: ProblemSpec, N: int = DEFAULT_GRID) -> ConeData:
    """rho = min(int_0^{1/4} 1/p, int_{3/4}^1 1/p) / int_0^1 1/p."""
    inv = _reciprocal_p(spec)
    table = cumulative(inv, N, tag="1/p")
    total = integrate(inv, 0.0, 1.0, N)
    head = integrate(inv, 0.0, WINDOW[0], N)
    tail = integrate(inv, WINDOW[1], 1.0, N)
    return ConeData(min(head, tail) / total, table, total)


def floor_profile(cone: ConeData) -> np.ndarray:
    """P^-1 min(int_0^t 1/p, int_t^1 1/p) at the nodes: the Harnack floor of a unit function."""
    F = cone.inv_p.values
    # clamp the rounding-level negatives at t = 1
    return np.maximum(np.minimum(F, cone.total - F), 0.0) / cone.total


def harnack_floor(u: GridFunction, cone: ConeData) -> GridFunction:
    """Lower bound t -> P^-1 min(int_0^t 1/p, int_t^1 1/p) |u|_0 for concave-type u."""
    if u.N != cone.inv_p.N:
        raise ValueError("grid mismatch between function and cone table")
    return GridFunction(floor_profile(cone) * u.sup, tag="harnack floor")


@dataclass(frozen=True)
class MembershipReport:
    member: bool
    margins: tuple[float, ...]  # min over [1/4,3/4] of u_i minus rho |u_i|_0
    negativity: tuple[float, ...]  # min_t u_i (>= -tol for members)
    tol: float

    def as_dict(self) -> dict:
        return {"member": self.member, "margins": list(self.margins),
                "min_values": list(self.negativity), "tol": self.tol}


def window_mask(N: int) -> np.ndarray:
    t = np.arange(N + 1) / N
    return (t >= WINDOW[0]) & (t <= WINDOW[1])


def in_cone(u_all: Sequence[GridFunction], cone: ConeData, tol: float = 0.0) -> MembershipReport:
    """Node-wise test of u_i >= 0 and min_{[1/4,3/4]} u_i >= rho |u_i|_0, each up to ``tol``."""
    margins, lows = [], []
    for u in u_all:
        vals = u.values
        lows.append(float(vals.min()))
        margins.append(float(vals[window_mask(u.N)].min() - cone.rho * u.sup))
    member = all(m >= -tol for m in margins) and all(v >= -tol for v in lows)
    return MembershipReport(member, tuple(margins), tuple(lows), tol)
