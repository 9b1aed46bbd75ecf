"""Problem description for the p-Laplacian system and its sampled hypothesis checks.

The system is

    (q(t) phi(p(t) u_i'(t)))' + f^i(t, u) = 0,   0 < t < 1,   u(0) = u(1) = 0,

with phi(x) = |x|^(p-2) x. The nonlinearity is either given per component
(``General``) or in the separable form ``lam * h_i(t) * g^i(u)`` (``Separable``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence, Union

import numpy as np

from .expr import (
    MAX_COMPONENTS,
    BinOp,
    Const,
    EvaluationError,
    Expr,
    constant,
    evaluate,
    evaluate_env,
    format_number,
    parse,
    substitute,
    to_source,
    variables,
)


class SpecError(ValueError):
    """Invalid problem description."""


class SampleEvaluationError(EvaluationError):
    """Expression failed at a specific validation sample."""

    def __init__(self, message: str, what: str, sample: dict):
        super().__init__(f"{what}: {message} at {sample}")
        self.what = what
        self.sample = sample


@dataclass(frozen=True)
class General:
    f: tuple[Expr, ...]


@dataclass(frozen=True)
class Separable:
    h: tuple[Expr, ...]
    g: tuple[Expr, ...]


Nonlinearity = Union[General, Separable]


def _state_names(n: int) -> set[str]:
    return {f"u{k}" for k in range(1, n + 1)}


@dataclass(frozen=True)
class ProblemSpec:
    n: int
    phi_exponent: float
    weight_p: Expr
    weight_q: Expr
    nonlinearity: Nonlinearity
    lam: float = 1.0

    def __post_init__(self):
        if not 1 <= self.n <= MAX_COMPONENTS:
            raise SpecError(f"component count must be in 1..{MAX_COMPONENTS}, got {self.n}")
        if not self.phi_exponent > 1:
            raise SpecError(f"phi exponent must exceed 1, got {self.phi_exponent}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise SpecError(f"lambda must be a finite nonnegative number, got {self.lam}")
        for name, ast in (("weight_p", self.weight_p), ("weight_q", self.weight_q)):
            if not variables(ast) <= {"t"}:
                raise SpecError(f"{name} may only depend on t")
        state = _state_names(self.n)
        nl = self.nonlinearity
        if isinstance(nl, General):
            if len(nl.f) != self.n:
                raise SpecError(f"expected {self.n} forcing expressions, got {len(nl.f)}")
            if self.lam != 1.0:
                raise SpecError("lambda scaling applies only to separable nonlinearities")
            for k, ast in enumerate(nl.f):
                if not variables(ast) <= state | {"t"}:
                    raise SpecError(f"f{k + 1} references variables outside t, u1..u{self.n}")
        elif isinstance(nl, Separable):
            if len(nl.h) != self.n or len(nl.g) != self.n:
                raise SpecError(f"expected {self.n} h and g expressions")
            for k, ast in enumerate(nl.h):
                if not variables(ast) <= {"t"}:
                    raise SpecError(f"h{k + 1} may only depend on t")
            for k, ast in enumerate(nl.g):
                if not variables(ast) <= state:
                    raise SpecError(f"g{k + 1} may only depend on u1..u{self.n}")
        else:
            raise SpecError("nonlinearity must be General or Separable")

    @property
    def separable(self) -> bool:
        return isinstance(self.nonlinearity, Separable)

    def p(self, t):
        return evaluate(self.weight_p, t)

    def q(self, t):
        return evaluate(self.weight_q, t)

    def h(self, i: int, t):
        return self.lam * evaluate(self.nonlinearity.h[i], t)

    def forcing(self, i: int, t, u: Sequence):
        """Effective f^i(t, u); for separable specs this is lam * h_i(t) * g^i(u)."""
        nl = self.nonlinearity
        if isinstance(nl, General):
            return evaluate(nl.f[i], t, u)
        return self.lam * evaluate(nl.h[i], t) * evaluate(nl.g[i], t, u)


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Check:
    """Outcome of one sampled hypothesis check."""

    name: str
    passed: bool
    component: int | None = None
    detail: str = ""
    witness: dict | None = None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "component": None if self.component is None else self.component + 1,
            "passed": self.passed,
            "detail": self.detail,
            "witness": self.witness,
        }


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    samples: int
    note: str = "sampled validation: finite samples, not a proof"

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "samples": self.samples,
            "note": self.note,
            "checks": [c.as_dict() for c in self.checks],
        }


def state_samples(n: int, magnitudes: Sequence[float]) -> np.ndarray:
    """Rows of u-samples: magnitude times (axis directions and the all-ones direction)."""
    directions = np.vstack([np.eye(n), np.ones((1, n))])
    rows = [m * d for m in magnitudes for d in directions]
    return np.unique(np.array(rows), axis=0)


class _Sampler:
    """Vectorised evaluation over t-samples x u-samples with pointwise fallback."""

    def __init__(self, label: str, func, t: np.ndarray, U: np.ndarray | None):
        self.label, self.func, self.t, self.U = label, func, t, U

    def __call__(self) -> np.ndarray:
        if self.U is None:
            try:
                return np.broadcast_to(self.func(self.t, None), self.t.shape)
            except EvaluationError as exc:
                self._locate(exc)
        tt = self.t[:, None]
        cols = [self.U[None, :, k] for k in range(self.U.shape[1])]
        try:
            return np.broadcast_to(self.func(tt, cols), (self.t.size, self.U.shape[0]))
        except EvaluationError as exc:
            self._locate(exc)

    def _locate(self, exc):
        rows = [None] if self.U is None else list(self.U)
        for t in self.t:
            for row in rows:
                try:
                    self.func(float(t), None if row is None else [float(x) for x in row])
                except EvaluationError as inner:
                    sample = {"t": float(t)}
                    if row is not None:
                        sample["u"] = [float(x) for x in row]
                    raise SampleEvaluationError(str(inner), self.label, sample) from exc
        raise SampleEvaluationError(str(exc), self.label, {}) from exc


def validate(spec: ProblemSpec, samples: int = 64, u_max: float = 1e3,
             decades: int = 3) -> ValidationReport:
    """Check (H1)-(H4) on a uniform t-grid and a log-spaced u-grid.

    The u-samples are magnitudes 10^-decades .. u_max (log spaced, one per decade)
    times the axis directions and the all-ones direction, plus u = 0.

    Raises:
        SampleEvaluationError: An expression failed at a sample; the sample is attached.
    """
    if samples < 64:
        raise ValueError("validation needs at least 64 samples")
    t = np.linspace(0.0, 1.0, samples)
    top = math.log10(u_max)
    mags = 10.0 ** np.linspace(-decades, top, int(round(top + decades)) + 1)
    U = np.vstack([np.zeros((1, spec.n)), state_samples(spec.n, mags)])
    checks: list[Check] = []

    pv = _Sampler("p(t)", lambda tt, _: evaluate(spec.weight_p, tt), t, None)()
    qv = _Sampler("q(t)", lambda tt, _: evaluate(spec.weight_q, tt), t, None)()
    checks.append(_positive("H2", "p(t) > 0", pv, t))
    checks.append(_positive("H2", "q(t) > 0", qv, t))
    drops = np.nonzero(np.diff(qv) < 0)[0]
    if drops.size:
        j = int(drops[0])
        checks.append(Check("H2", False, detail="q(t) nondecreasing", witness={
            "t": [float(t[j]), float(t[j + 1])], "q": [float(qv[j]), float(qv[j + 1])]}))
    else:
        checks.append(Check("H2", True, detail="q(t) nondecreasing"))

    nl = spec.nonlinearity
    if isinstance(nl, General):
        for i, ast in enumerate(nl.f):
            vals = _Sampler(f"f{i + 1}", lambda tt, cols, a=ast: evaluate(a, tt, cols or []), t, U)()
            bad = np.argwhere(~(vals > 0))
            if bad.size:
                j, m = bad[0]
                checks.append(Check("H1", False, i, "f^i(t,u) > 0", {
                    "t": float(t[j]), "u": U[m].tolist(), "value": float(vals[j, m])}))
            else:
                checks.append(Check("H1", True, i, "f^i(t,u) > 0"))
    else:
        for i in range(spec.n):
            gv = _Sampler(f"g{i + 1}", lambda tt, cols, a=nl.g[i]: evaluate(a, tt, cols or []),
                          np.zeros(1), U)()[0]
            norms = np.max(np.abs(U), axis=1)
            bad = np.nonzero((gv < 0) | ((norms > 0) & ~(gv > 0)))[0]
            if bad.size:
                m = int(bad[0])
                checks.append(Check("H3", False, i, "g^i >= 0 and g^i(u) > 0 for |u| > 0",
                                    {"u": U[m].tolist(), "value": float(gv[m])}))
            else:
                checks.append(Check("H3", True, i, "g^i >= 0 and g^i(u) > 0 for |u| > 0"))
            hv = _Sampler(f"h{i + 1}", lambda tt, _, a=nl.h[i]: evaluate(a, tt), t, None)()
            neg = np.nonzero(hv < 0)[0]
            zero_run = np.nonzero((hv[:-1] == 0) & (hv[1:] == 0))[0]
            if neg.size:
                j = int(neg[0])
                checks.append(Check("H4", False, i, "h_i(t) >= 0",
                                    {"t": float(t[j]), "value": float(hv[j])}))
            elif zero_run.size:
                j = int(zero_run[0])
                checks.append(Check("H4", False, i, "h_i not identically 0 on any subinterval",
                                    {"t": [float(t[j]), float(t[j + 1])]}))
            else:
                checks.append(Check("H4", True, i, "h_i >= 0, not identically 0 on any subinterval"))
    return ValidationReport(tuple(checks), samples)


def _positive(name: str, detail: str, vals: np.ndarray, t: np.ndarray) -> Check:
    bad = np.nonzero(~(vals > 0))[0]
    if bad.size:
        j = int(bad[0])
        return Check(name, False, detail=detail, witness={"t": float(t[j]), "value": float(vals[j])})
    return Check(name, True, detail=detail)


# ------------------------------------------------------------------ transforms


def scale_by_lambda(spec: ProblemSpec, lam: float) -> ProblemSpec:
    """Multiply the separable nonlinearity by ``lam``; the input spec is not modified."""
    if not spec.separable:
        raise SpecError("lambda scaling is defined only for separable nonlinearities h_i(t) g^i(u)")
    if not lam > 0:
        raise SpecError(f"lambda must be positive, got {lam}")
    return replace(spec, lam=spec.lam * lam)


@dataclass(frozen=True)
class RadialSpec:
    """Radial annulus problem  (r^(N-1) phi(u_i'))' + r^(N-1) k_i(r) g^i(u) = 0  on R1 < r < R2."""

    n: int
    phi_exponent: float
    dimension: int
    R1: float
    R2: float
    k: tuple[Expr, ...]
    g: tuple[Expr, ...]

    def __post_init__(self):
        if not (0 < self.R1 < self.R2 < math.inf):
            raise SpecError(f"radii must satisfy 0 < R1 < R2 < inf, got R1={self.R1}, R2={self.R2}")
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise SpecError(f"dimension N must be an integer >= 2, got {self.dimension}")
        if not self.phi_exponent > 1:
            raise SpecError("phi exponent must exceed 1")
        if len(self.k) != self.n or len(self.g) != self.n:
            raise SpecError(f"expected {self.n} k and g expressions")
        for ast in self.k:
            if not variables(ast) <= {"r"}:
                raise SpecError("k_i may only depend on r")

    def k_values(self, i: int, r):
        return evaluate_env(self.k[i], {"r": r})


def _linear(slope: float, offset: float) -> Expr:
    t = parse("t")
    body = t if slope == 1 else BinOp("*", constant(slope), t)
    return body if offset == 0 else BinOp("+", body, constant(offset))


def radial_to_bvp(rspec: RadialSpec, samples: int = 64) -> ProblemSpec:
    """Map the annulus problem to [0, 1] with r = (R2 - R1) t + R1.

    Gives q(t) = r^(N-1), a constant p(t) = 1/(R2 - R1) and
    h_i(t) = (R2 - R1) r^(N-1) k_i(r); the g^i are unchanged.
    """
    L = rspec.R2 - rspec.R1
    rs = np.linspace(rspec.R1, rspec.R2, samples)
    for i in range(rspec.n):
        kv = np.broadcast_to(rspec.k_values(i, rs), rs.shape)
        if np.any(kv < 0):
            raise SpecError(f"k{i + 1}(r) is negative at r={rs[np.argmax(kv < 0)]}")
    r_of_t = _linear(L, rspec.R1)
    q = BinOp("^", r_of_t, constant(rspec.dimension - 1))
    p = constant(1.0 / L)
    hs = []
    radial_weight = r_of_t if rspec.dimension == 2 else q
    for k in rspec.k:
        h: Expr = radial_weight
        if k != Const(1.0):
            h = BinOp("*", h, substitute(k, "r", r_of_t))
        if L != 1:
            h = BinOp("*", constant(L), h)
        hs.append(h)
    return ProblemSpec(rspec.n, rspec.phi_exponent, p, q, Separable(tuple(hs), tuple(rspec.g)))


# ---------------------------------------------------------------------- JSON


def _exprs(values: Any, key: str, extra: Sequence[str] = ()) -> tuple[Expr, ...]:
    if not isinstance(values, list) or not values:
        raise SpecError(f"{key!r} must be a non-empty array of expression strings")
    return tuple(parse(str(v), extra) for v in values)


def _expr_text(value: Any) -> str:
    return format_number(value) if isinstance(value, (int, float)) else str(value)


def radial_from_dict(d: dict, n: int, phi_exponent: float) -> RadialSpec:
    try:
        return RadialSpec(
            n=n,
            phi_exponent=phi_exponent,
            dimension=d["N"],
            R1=float(d["R1"]),
            R2=float(d["R2"]),
            k=_exprs([_expr_text(v) for v in d["k"]], "k", ("r",)),
            g=_exprs([_expr_text(v) for v in d["g"]], "g"),
        )
    except KeyError as exc:
        raise SpecError(f"radial object missing key {exc}") from None


def spec_from_dict(d: dict) -> ProblemSpec:
    """Build a spec from the problem-file mapping.

    A file holding a ``radial`` object and no weights is transformed with
    :func:`radial_to_bvp`.
    """
    if not isinstance(d, dict):
        raise SpecError("problem file must hold a JSON object")
    try:
        n = int(d["n"])
        expo = float(d["phi_exponent"])
    except KeyError as exc:
        raise SpecError(f"problem file missing key {exc}") from None
    if "radial" in d and "weight_p" not in d:
        spec = radial_to_bvp(radial_from_dict(d["radial"], n, expo))
        return scale_by_lambda(spec, float(d["lambda"])) if "lambda" in d else spec
    try:
        p = parse(_expr_text(d["weight_p"]))
        q = parse(_expr_text(d["weight_q"]))
    except KeyError as exc:
        raise SpecError(f"problem file missing key {exc}") from None
    if "f" in d:
        if "h" in d or "g" in d:
            raise SpecError("give either 'f' or 'h' + 'g', not both")
        nl: Nonlinearity = General(_exprs([_expr_text(v) for v in d["f"]], "f"))
    elif "h" in d and "g" in d:
        nl = Separable(_exprs([_expr_text(v) for v in d["h"]], "h"),
                       _exprs([_expr_text(v) for v in d["g"]], "g"))
    else:
        raise SpecError("problem file needs 'f' or both 'h' and 'g'")
    return ProblemSpec(n, expo, p, q, nl, float(d.get("lambda", 1.0)))


def spec_to_dict(spec: ProblemSpec) -> dict:
    d: dict[str, Any] = {
        "n": spec.n,
        "phi_exponent": spec.phi_exponent,
        "weight_p": to_source(spec.weight_p),
        "weight_q": to_source(spec.weight_q),
    }
    nl = spec.nonlinearity
    if isinstance(nl, General):
        d["f"] = [to_source(a) for a in nl.f]
    else:
        d["h"] = [to_source(a) for a in nl.h]
        d["g"] = [to_source(a) for a in nl.g]
        d["lambda"] = spec.lam
    return d


def load_problem(path: str | Path) -> ProblemSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))


def load_radial(path: str | Path) -> RadialSpec:
    with open(path) as fh:
        d = json.load(fh)
    if not isinstance(d, dict) or "radial" not in d:
        raise SpecError("radial file needs a 'radial' object")
    try:
        return radial_from_dict(d["radial"], int(d["n"]), float(d["phi_exponent"]))
    except KeyError as exc:
        raise SpecError(f"radial file missing key {exc}") from None
