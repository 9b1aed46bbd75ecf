"""Window functional gamma_a, the constants A_i and B_i, g-limits, lambda-intervals and hypothesis checks.

For a nonnegative density a on [0, 1],

    gamma_a(t) = (rho/2) [ int_{1/4}^t (1/p) phi^-1((1/q) int_s^t a) ds
                         + int_t^{3/4} (1/p) phi^-1((1/q) int_t^s a) ds ],

which is the pivot-integral pair of the operator module restricted to the
window [1/4, 3/4] and summed instead of differenced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .cone import WINDOW, compute_rho
from .expr import EvaluationError, Expr, evaluate, scaled
from .operator import PivotIntegrals, phi, phi_inv
from .problem import Check, ProblemSpec, SpecError
from .quadrature import DEFAULT_GRID, cumulative, integrate, sample_between
from .solver import SolverConfig, solve

Density = Union[Expr, Callable, float]

SCAN_POINTS = 65
GOLDEN_TOL = 1e-10
LAMBDA_CAP = 1e6
LAMBDA_FLOOR = 1e-6
GROWTH = 10.0


def _density(a: Density) -> Callable:
    if isinstance(a, (int, float)):
        c = float(a)
        return lambda t: np.full(np.shape(t), c)
    if callable(a):
        return a
    return lambda t: evaluate(a, t)


def _require_separable(spec: ProblemSpec):
    if not spec.separable:
        raise SpecError("this analysis needs a separable nonlinearity h_i(t) g^i(u)")


# -------------------------------------------------------------------- gamma


class GammaEvaluator:
    """gamma_a on [1/4, 3/4] for a fixed spec and density ``a``."""

    def __init__(self, spec: ProblemSpec, a: Density, N: int = DEFAULT_GRID):
        self.spec = spec
        self.rho = compute_rho(spec, N).rho
        table = cumulative(_density(a), N, tag="a")
        if np.any(np.diff(table.values) < -1e-14 * (1.0 + np.abs(table.values).max())):
            raise ValueError("density must be nonnegative")
        self.pivots = PivotIntegrals(spec, table, lo=WINDOW[0], hi=WINDOW[1])

    def __call__(self, t: float) -> float:
        if not WINDOW[0] <= t <= WINDOW[1]:
            raise ValueError(f"gamma is defined on [1/4, 3/4], got t={t}")
        left, right = self.pivots.split(float(t))
        return 0.5 * self.rho * (left + right)

    def many(self, ts: Sequence[float], chunk: int = 256) -> np.ndarray:
        """Vectorized evaluation over many window points."""
        ts = np.asarray(ts, dtype=float)
        if ts.size and not (ts.min() >= WINDOW[0] and ts.max() <= WINDOW[1]):
            raise ValueError("gamma is defined on [1/4, 3/4]")
        out = np.empty(ts.size)
        for start in range(0, ts.size, chunk):
            out[start:start + chunk] = self._block(ts[start:start + chunk])
        return out

    def _block(self, ts: np.ndarray) -> np.ndarray:
        pv = self.pivots
        k = np.clip(np.searchsorted(pv.breaks, ts, side="right") - 1, 0, pv.breaks.size - 2)
        Fc = np.atleast_1d(sample_between(pv.F, ts))
        cells = np.arange(pv.breaks.size - 1)
        diff = pv.F_pts[None] - Fc[:, None, None]
        left = np.sum(pv.wp * pv._kernel(-diff, pv.inv_q), axis=2)
        right = np.sum(pv.wp * pv._kernel(diff, pv.inv_q), axis=2)
        full = np.where(cells[None] < k[:, None], left, 0.0) \
            + np.where(cells[None] > k[:, None], right, 0.0)
        partial = np.array([sum(pv.partials(t, kk, fc)) for t, kk, fc in zip(ts, k, Fc)])
        return 0.5 * self.rho * (full.sum(axis=1) + partial)


def gamma(spec: ProblemSpec, a: Density, t, N: int = DEFAULT_GRID):
    """gamma_a(t) for scalar or array ``t`` in [1/4, 3/4]."""
    ev = GammaEvaluator(spec, a, N)
    if np.ndim(t) == 0:
        return ev(float(t))
    return ev.many(np.asarray(t, dtype=float))


# ------------------------------------------------------------ A_i and B_i


def _h(spec: ProblemSpec, i: int) -> Expr:
    _require_separable(spec)
    if not 0 <= i < spec.n:
        raise IndexError(f"component {i} out of range")
    return spec.nonlinearity.h[i]


def unit_bound_integral(spec: ProblemSpec, a: Density, N: int = DEFAULT_GRID) -> float:
    """int_0^1 (1/p(s)) phi^-1((1/q(s)) int_0^1 a) ds."""
    mass = integrate(_density(a), 0.0, 1.0, N)
    expo = spec.phi_exponent

    def integrand(s):
        pv = np.broadcast_to(np.asarray(spec.p(s), dtype=float), np.shape(s))
        qv = np.broadcast_to(np.asarray(spec.q(s), dtype=float), np.shape(s))
        return phi_inv(mass / qv, expo) / pv

    return integrate(integrand, 0.0, 1.0, N)


def compute_A_i(spec: ProblemSpec, i: int, N: int = DEFAULT_GRID) -> float:
    """A_i = int_0^1 (1/p(s)) phi^-1((1/q(s)) int_0^1 h_i) ds; zero when h_i vanishes."""
    return unit_bound_integral(spec, _h(spec, i), N)


@dataclass(frozen=True)
class Minimum:
    value: float
    t: float


def golden_section(fn: Callable[[float], float], a: float, b: float,
                   tol: float = GOLDEN_TOL) -> Minimum:
    """Golden-section search for a minimum of ``fn`` on [a, b] down to width ``tol``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    t = 0.5 * (a + b)
    return Minimum(fn(t), t)


def minimize_gamma(spec: ProblemSpec, a: Density, N: int = DEFAULT_GRID,
                   scan: int = SCAN_POINTS, tol: float = GOLDEN_TOL) -> Minimum:
    """Minimum of gamma_a over the window: grid scan, then golden section around the best point."""
    ev = GammaEvaluator(spec, a, N)
    ts = np.linspace(WINDOW[0], WINDOW[1], scan)
    vals = ev.many(ts)
    j = int(np.argmin(vals))
    lo, hi = ts[max(j - 1, 0)], ts[min(j + 1, scan - 1)]
    best = golden_section(ev, lo, hi, tol)
    if vals[j] < best.value:
        return Minimum(float(vals[j]), float(ts[j]))
    return best


def compute_B_i(spec: ProblemSpec, i: int, N: int = DEFAULT_GRID) -> float:
    """B_i = min over [1/4, 3/4] of gamma_{h_i}."""
    return minimize_gamma(spec, _h(spec, i), N).value


# ------------------------------------------------------------------ g-limits


@dataclass(frozen=True)
class GLimit:
    """Estimated or declared value of a limit of g^i(u) / phi(|u|).

    ``lo``/``hi`` bound the spread over the sampled directions; both are 0 or
    inf for a vanishing or diverging verdict.
    """

    lo: float
    hi: float
    kind: str  # "finite", "zero" or "infinite"
    source: str  # "estimated" or "declared"
    decades: tuple[float, ...] = ()  # ratios at the three extreme decades

    @classmethod
    def declared(cls, value: float) -> "GLimit":
        value = float(value)
        if not value >= 0:
            raise ValueError(f"declared g-limit must be nonnegative, got {value}")
        kind = "infinite" if math.isinf(value) else "zero" if value == 0 else "finite"
        return cls(value, value, kind, "declared")

    def as_dict(self) -> dict:
        return {"lo": _num(self.lo), "hi": _num(self.hi), "kind": self.kind,
                "source": self.source, "decades": [_num(v) for v in self.decades]}


def _num(x: float):
    # JSON has no infinity; encode as a string
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def default_magnitudes() -> np.ndarray:
    return 10.0 ** np.arange(-9, 10)


def sample_directions(n: int, directions: int, rng: np.random.Generator) -> np.ndarray:
    """Axis vectors, the all-ones vector and random nonnegative vectors, each of max-norm 1."""
    base = [np.eye(n)[k] for k in range(n)] + [np.ones(n)]
    extra = rng.random((max(directions - n - 1, 0), n))
    extra = extra / extra.max(axis=1, keepdims=True)
    return np.vstack([base, extra]) if len(extra) else np.array(base)


def _trend(seq: Sequence[float]) -> bool:
    # each step grows by the factor GROWTH, up to rounding
    return all(b >= GROWTH * a * (1 - 1e-9) and b > 0 for a, b in zip(seq, seq[1:]))


def estimate_g_limits(spec: ProblemSpec, i: int, magnitudes: Sequence[float] | None = None,
                      directions: int | None = None, seed: int = 42) -> tuple[GLimit, GLimit]:
    """Estimate (g0, ginf) for component ``i`` from samples of g^i(s d) / phi(s).

    ``magnitudes`` must be log-spaced over at least six decades. A limit is
    called infinite (zero) when the ratio grows (shrinks) by a factor of at
    least 10 per step over the three most extreme magnitudes on that side.
    """
    _require_separable(spec)
    mags = np.sort(np.asarray(default_magnitudes() if magnitudes is None else magnitudes, float))
    if mags.size < 3 or not mags[0] > 0 or math.log10(mags[-1] / mags[0]) < 6 - 1e-9:
        raise ValueError("magnitudes must be positive and span at least six decades")
    n = spec.n
    dirs = sample_directions(n, n + 1 + 8 if directions is None else directions,
                             np.random.default_rng(seed))
    g = spec.nonlinearity.g[i]
    lo, hi = np.full(mags.size, np.inf), np.full(mags.size, -np.inf)
    for d in dirs:
        for k, s in enumerate(mags):
            try:
                val = float(evaluate(g, 0.0, list(s * d)))
            except EvaluationError:
                continue
            ratio = val / phi(s, spec.phi_exponent)
            lo[k], hi[k] = min(lo[k], ratio), max(hi[k], ratio)
    ok = np.isfinite(lo) & np.isfinite(hi)
    if ok.sum() < 3:
        raise EvaluationError(f"g{i + 1} could not be evaluated on enough samples")
    lo, hi, mags = lo[ok], hi[ok], mags[ok]
    small = _limit(lo[:3][::-1], hi[:3][::-1])
    large = _limit(lo[-3:], hi[-3:])
    return small, large


def _limit(lo: np.ndarray, hi: np.ndarray) -> GLimit:
    # lo/hi ordered from the least to the most extreme magnitude
    decades = tuple(float(v) for v in 0.5 * (lo + hi))
    if _trend(lo):
        return GLimit(math.inf, math.inf, "infinite", "estimated", decades)
    if _trend(1.0 / np.maximum(hi, np.finfo(float).tiny)) or hi[-1] == 0.0:
        return GLimit(0.0, 0.0, "zero", "estimated", decades)
    return GLimit(float(lo[-1]), float(hi[-1]), "finite", "estimated", decades)


def resolve_g_limits(spec: ProblemSpec, overrides: Mapping | None = None, seed: int = 42,
                     magnitudes: Sequence[float] | None = None) -> list[tuple[GLimit, GLimit]]:
    """Per-component (g0, ginf); declared values in ``overrides`` win over estimates.

    ``overrides`` may hold ``"g0"`` and/or ``"ginf"`` lists of length n
    (``None`` entries fall back to estimation).
    """
    overrides = overrides or {}
    out = []
    for i in range(spec.n):
        g0_decl = _entry(overrides.get("g0"), i, spec.n)
        gi_decl = _entry(overrides.get("ginf"), i, spec.n)
        est = None
        if g0_decl is None or gi_decl is None:
            est = estimate_g_limits(spec, i, magnitudes, seed=seed)
        g0 = GLimit.declared(g0_decl) if g0_decl is not None else est[0]
        gi = GLimit.declared(gi_decl) if gi_decl is not None else est[1]
        out.append((g0, gi))
    return out


def _entry(values, i: int, n: int):
    if values is None:
        return None
    if len(values) == 1:
        return values[0]
    if len(values) != n:
        raise ValueError(f"expected 1 or {n} declared g-limits, got {len(values)}")
    return values[i]


# ----------------------------------------------------------------- intervals


def _recip(x: float) -> float:
    # 1/inf = 0 and 1/0 = inf
    if math.isinf(x):
        return 0.0
    if x == 0:
        return math.inf
    return 1.0 / x


def _endpoint(const: float, expo: float, g: float) -> float:
    """1 / (const^(p-1) g) with the 0 and inf conventions."""
    inv_g = _recip(g)
    if inv_g == 0.0:
        return 0.0
    return inv_g * _recip(const ** (expo - 1.0))


@dataclass(frozen=True)
class ComponentConstants:
    A: float
    B: float
    g0: GLimit
    ginf: GLimit

    def as_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "g0": self.g0.as_dict(), "ginf": self.ginf.as_dict()}


Interval = tuple[float, float]


@dataclass(frozen=True)
class IntervalReport:
    rho: float
    phi_exponent: float
    components: tuple[ComponentConstants, ...]
    A: float
    B: float
    interval_s: Interval | None
    interval_t: Interval | None
    corollary_i: tuple[bool, ...]
    corollary_ii: tuple[bool, ...]
    degenerate: tuple[int, ...] = ()  # components with A_i = 0 or B_i = 0

    @property
    def corollary_interval(self) -> Interval | None:
        """(0, inf) when every component meets condition (i), or every one meets (ii)."""
        if all(self.corollary_i) or all(self.corollary_ii):
            return (0.0, math.inf)
        return None

    @property
    def empty(self) -> bool:
        return self.interval_s is None and self.interval_t is None

    def as_dict(self) -> dict:
        def iv(x):
            return None if x is None else [_num(x[0]), _num(x[1])]

        return {
            "rho": self.rho,
            "phi_exponent": self.phi_exponent,
            "components": [c.as_dict() for c in self.components],
            "A": self.A,
            "B": self.B,
            "interval_s": iv(self.interval_s),
            "interval_t": iv(self.interval_t),
            "corollary": {"i": list(self.corollary_i), "ii": list(self.corollary_ii),
                          "interval": iv(self.corollary_interval)},
            "degenerate_components": [k + 1 for k in self.degenerate],
        }


def _open_interval(lower: float, upper: float) -> Interval | None:
    return (lower, upper) if lower < upper else None


def component_constants(spec: ProblemSpec, g_limits: Sequence[tuple[GLimit, GLimit]],
                        N: int = DEFAULT_GRID) -> tuple[ComponentConstants, ...]:
    return tuple(ComponentConstants(compute_A_i(spec, i, N), compute_B_i(spec, i, N), g0, gi)
                 for i, (g0, gi) in enumerate(g_limits))


def eigenvalue_intervals(spec: ProblemSpec, g_limits: Mapping | None = None, seed: int = 42,
                         N: int = DEFAULT_GRID,
                         constants: Sequence[ComponentConstants] | None = None) -> IntervalReport:
    """Both lambda-intervals with the conventions 1/inf = 0 and 1/0 = inf.

    interval_s = (1/(B^(p-1) min ginf), 1/(A^(p-1) max g0)) and interval_t
    swaps g0 and ginf. Spread estimates use their conservative side, so an
    interval never widens because of sampling noise.
    """
    _require_separable(spec)
    comps = tuple(constants) if constants is not None else \
        component_constants(spec, resolve_g_limits(spec, g_limits, seed), N)
    expo = spec.phi_exponent
    A = max(c.A for c in comps)
    B = min(c.B for c in comps)
    interval_s = _open_interval(_endpoint(B, expo, min(c.ginf.lo for c in comps)),
                                _endpoint(A, expo, max(c.g0.hi for c in comps)))
    interval_t = _open_interval(_endpoint(B, expo, min(c.g0.lo for c in comps)),
                                _endpoint(A, expo, max(c.ginf.hi for c in comps)))
    cond_i = tuple(c.ginf.kind == "infinite" and c.g0.kind == "zero" for c in comps)
    cond_ii = tuple(c.g0.kind == "infinite" and c.ginf.kind == "zero" for c in comps)
    degenerate = tuple(k for k, c in enumerate(comps) if c.A == 0 or c.B == 0)
    rho = compute_rho(spec, N).rho
    return IntervalReport(rho, expo, comps, A, B, interval_s, interval_t, cond_i, cond_ii,
                          degenerate)


# -------------------------------------------------------------- hypotheses


@dataclass(frozen=True)
class HypothesisReport:
    """Verdicts for named hypotheses, each backed by per-component checks."""

    verdicts: dict
    checks: tuple[Check, ...] = ()
    note: str = ""

    def holds(self, name: str) -> bool:
        return bool(self.verdicts[name])

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {"verdicts": dict(self.verdicts), "checks": [c.as_dict() for c in self.checks],
                "note": self.note}


def _power_recip(x: float, expo: float) -> float:
    """(1/x)^(p-1) with 1/0 = inf."""
    return _recip(x) ** (expo - 1.0) if x > 0 else math.inf


def check_h1_h2(spec: ProblemSpec, g_limits: Mapping | None = None, seed: int = 42,
                N: int = DEFAULT_GRID,
                constants: Sequence[ComponentConstants] | None = None) -> HypothesisReport:
    """(h1): g0 < (1/A_i)^(p-1) and (1/B_i)^(p-1) < ginf for every i; (h2) swaps g0 and ginf."""
    _require_separable(spec)
    comps = tuple(constants) if constants is not None else \
        component_constants(spec, resolve_g_limits(spec, g_limits, seed), N)
    expo = spec.phi_exponent
    checks = []
    for i, c in enumerate(comps):
        top, bottom = _power_recip(c.A, expo), _power_recip(c.B, expo)
        for name, small, large in (("h1", c.g0, c.ginf), ("h2", c.ginf, c.g0)):
            ok = small.hi < top and bottom < large.lo
            checks.append(Check(name, ok, i,
                                f"small-side limit {small.hi} < {top} and {bottom} < large-side "
                                f"limit {large.lo}"))
    verdicts = {name: all(ch.passed for ch in checks if ch.name == name) for name in ("h1", "h2")}
    return HypothesisReport(verdicts, tuple(checks))


def _box_points(n: int, lows: np.ndarray, highs: np.ndarray, samples: int,
                rng: np.random.Generator) -> np.ndarray:
    corners = np.array(np.meshgrid(*[[lo, hi] for lo, hi in zip(lows, highs)],
                                   indexing="ij")).reshape(n, -1).T
    interior = lows + (highs - lows) * rng.random((samples, n))
    return np.vstack([corners, interior])


def _sampled_bound(spec: ProblemSpec, i: int, ts: np.ndarray, points: np.ndarray,
                   bound: np.ndarray, lower: bool, name: str, rtol: float) -> Check:
    """f^i(t, u) >= bound(t) (``lower``) or <= bound(t) over all t and sampled u."""
    T = np.repeat(ts, len(points))
    U = np.tile(points, (ts.size, 1)).T
    f = np.broadcast_to(spec.forcing(i, T, list(U)), T.shape)
    b = np.repeat(bound, len(points))
    slack = rtol * np.maximum(np.abs(b), 1.0)
    bad = (f < b - slack) if lower else (f > b + slack)
    if not bad.any():
        return Check(name, True, i, f"{T.size} samples")
    k = int(np.argmax(bad))
    witness = {"t": float(T[k]), "u": [float(x) for x in U[:, k]], "f": float(f[k]),
               "bound": float(b[k])}
    return Check(name, False, i, "sampled bound violated", witness)


def check_D1_D2(spec: ProblemSpec, alpha: float, beta: float, psi: Sequence[Density],
                varphi: Sequence[Density], samples: int = 256, seed: int = 42,
                N: int = DEFAULT_GRID, rtol: float = 1e-9, t_points: int = 65,
                floor: float = 1e-9) -> HypothesisReport:
    """Sampled check of (D1) with radius ``alpha`` and (D2) with radius ``beta``.

    (D1): f^i >= (rho alpha)^(p-1) psi_i on t in [1/4, 3/4], u_j in [0, alpha],
    u_i in [rho alpha, alpha], and min over the window of gamma_{psi_i} >= 1.
    (D2): f^i <= beta^(p-1) varphi_i on t in [0, 1], u_j in (0, beta], and the
    unit-bound integral of varphi_i is <= 1. The open end at 0 is sampled
    from ``floor``. Box samples are the corners plus ``samples`` uniform
    interior points; equality-type conditions pass within ``rtol``.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    if alpha == beta:
        raise ValueError("alpha and beta must differ")
    n, expo = spec.n, spec.phi_exponent
    if len(psi) != n or len(varphi) != n:
        raise ValueError(f"need {n} psi and {n} varphi functions")
    rng = np.random.default_rng(seed)
    rho = compute_rho(spec, N).rho
    window_t = np.linspace(WINDOW[0], WINDOW[1], t_points)
    all_t = np.linspace(0.0, 1.0, 2 * t_points - 1)
    checks = []
    for i in range(n):
        lows = np.zeros(n)
        lows[i] = rho * alpha
        pts = _box_points(n, lows, np.full(n, float(alpha)), samples, rng)
        bound = (rho * alpha) ** (expo - 1.0) * np.broadcast_to(_density(psi[i])(window_t),
                                                                window_t.shape)
        checks.append(_sampled_bound(spec, i, window_t, pts, bound, True, "D1 bound", rtol))
        m = minimize_gamma(spec, psi[i], N)
        checks.append(Check("D1 gamma", m.value >= 1.0 - rtol, i,
                            f"min gamma_psi = {m.value} at t = {m.t}"))

        pts = _box_points(n, np.full(n, min(floor, beta)), np.full(n, float(beta)), samples, rng)
        bound = beta ** (expo - 1.0) * np.broadcast_to(_density(varphi[i])(all_t), all_t.shape)
        checks.append(_sampled_bound(spec, i, all_t, pts, bound, False, "D2 bound", rtol))
        val = unit_bound_integral(spec, varphi[i], N)
        checks.append(Check("D2 integral", val <= 1.0 + rtol, i, f"integral = {val}"))
    verdicts = {name: all(c.passed for c in checks if c.name.startswith(name))
                for name in ("D1", "D2")}
    return HypothesisReport(verdicts, tuple(checks),
                            note=f"sampled: corners plus {samples} interior points; "
                                 f"open end at 0 sampled from {floor}")


def proof_weights(spec: ProblemSpec, N: int = DEFAULT_GRID) -> tuple[list[Expr], list[Expr]]:
    """psi_i = (1/B_i)^(p-1) h_i and varphi_i = (1/A_i)^(p-1) h_i."""
    _require_separable(spec)
    expo = spec.phi_exponent
    psi, varphi = [], []
    for i in range(spec.n):
        h = spec.nonlinearity.h[i]
        psi.append(scaled(h, _power_recip(compute_B_i(spec, i, N), expo)))
        varphi.append(scaled(h, _power_recip(compute_A_i(spec, i, N), expo)))
    return psi, varphi


# -------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepRow:
    lam: float
    converged: bool
    positive: bool
    norm: float
    r_fp: float
    r_ode: float
    sigmas: tuple[float, ...]
    error: str = ""


@dataclass(frozen=True)
class SweepReport:
    interval: Interval | None
    rows: tuple[SweepRow, ...] = ()
    capped: bool = False
    floored: bool = False

    @property
    def all_converged(self) -> bool:
        return bool(self.rows) and all(r.converged and r.positive for r in self.rows)


def sweep_lambdas(interval: Interval, points: int, cap: float = LAMBDA_CAP,
                  floor: float = LAMBDA_FLOOR) -> tuple[np.ndarray, bool, bool]:
    """Log-spaced lambdas over the (truncated) closed interval; also flags truncation."""
    lo, hi = interval
    capped, floored = hi > cap, lo < floor
    lo, hi = max(lo, floor), min(hi, cap)
    if points == 1:
        return np.array([math.sqrt(lo * hi)]), capped, floored
    return np.geomspace(lo, hi, points), capped, floored


def lambda_sweep(spec: ProblemSpec, interval: Interval | None, points: int,
                 config: SolverConfig = SolverConfig(), cap: float = LAMBDA_CAP,
                 floor: float = LAMBDA_FLOOR,
                 lambdas: Sequence[float] | None = None) -> SweepReport:
    """Solve the lambda-scaled problem across ``interval`` (or at explicit ``lambdas``).

    Each lambda replaces the spec's own scaling. Failures are recorded per row.
    """
    _require_separable(spec)
    if points < 1:
        raise ValueError("points must be >= 1")
    if lambdas is None:
        if interval is None or not interval[0] <= interval[1] or interval[1] <= 0:
            return SweepReport(interval)
        lams, capped, floored = sweep_lambdas(interval, points, cap, floor)
    else:
        lams, capped, floored = np.asarray(lambdas, dtype=float), False, False
    rows = []
    for lam in lams:
        try:
            b = solve(replace(spec, lam=float(lam)), config)
            rows.append(SweepRow(float(lam), b.converged, b.positive, b.norm, b.r_fp, b.r_ode,
                                 tuple(float(s) for s in b.sigmas)))
        except (EvaluationError, ValueError, OverflowError) as exc:
            nan = math.nan
            rows.append(SweepRow(float(lam), False, False, nan, nan, nan,
                                 (nan,) * spec.n, str(exc)))
    return SweepReport(interval, tuple(rows), capped, floored)
