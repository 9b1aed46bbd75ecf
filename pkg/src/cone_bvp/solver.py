"""Fixed points of T: damped Picard, a level-matched variant, and Newton on the grid values.

A fixed point u = Tu is a positive solution of the boundary value problem.
Picard convergence is not guaranteed (the existence argument is topological),
so non-convergence is reported through the ``converged`` flag rather than
raised. Superlinear problems typically repel plain Picard along the scaling
direction; the level-matched iteration fixes the amplitude by solving
|T(L v)|_0 = L for the scalar L and only iterates the shape v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
import numpy as np
from scipy.optimize import brentq

from .cone import ConeData, MembershipReport, compute_rho, floor_profile, in_cone
from .expr import EvaluationError, evaluate
from .operator import OperatorOutput, apply_T, phi
from .problem import ProblemSpec, RadialSpec
from .quadrature import DEFAULT_GRID, GridFunction, check_grid, grid_nodes

GUESS_MODES = ("flat-bump", "scaled-floor", "user")
METHODS = ("picard", "newton", "auto")
POSITIVE_NORM = 1e-8
LEVEL_RANGE = (1e-6, 1e6)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for one solve.

    Attributes:
        grid: Even number of cells N >= 16.
        damping: Picard relaxation theta in (0, 1].
        max_iter: Iteration cap for each fixed-point stage.
        tol: Residual tolerance; convergence means r_fp <= tol * (1 + |u|).
        guess: Initial guess mode, one of ``GUESS_MODES``.
        level: Amplitude of the initial guess. ``None`` picks it by matching
            |T(L v)|_0 = L over a log-spaced scan.
        newton_switch: Picard iterations without a new best residual before
            ``auto`` moves on to the next stage.
        method: ``picard``, ``newton`` or ``auto``.
        newton_max_iter: Newton iteration cap.
        user_guess: Node values (n rows of N + 1) for ``guess="user"``.
    """

    grid: int = DEFAULT_GRID
    damping: float = 0.5
    max_iter: int = 500
    tol: float = 1e-10
    guess: str = "flat-bump"
    level: float | None = None
    newton_switch: int = 25
    method: str = "auto"
    newton_max_iter: int = 30
    user_guess: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        check_grid(self.grid)
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 0 or self.newton_max_iter < 0 or self.newton_switch < 1:
            raise ValueError("iteration limits must be nonnegative")
        if self.guess not in GUESS_MODES:
            raise ValueError(f"unknown guess mode {self.guess!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.level is not None and not self.level > 0:
            raise ValueError("level must be positive")
        if self.guess == "user" and self.user_guess is None:
            raise ValueError("guess='user' needs user_guess values")


@dataclass(frozen=True)
class SolutionBundle:
    components: tuple[GridFunction, ...]
    sigmas: tuple[float, ...]
    r_fp: float
    r_ode: float
    cone: MembershipReport
    norm: float
    iterations: int
    converged: bool
    method: str
    tol: float

    @property
    def positive(self) -> bool:
        """False for the trivial solution (|u| <= 1e-8)."""
        return self.norm > POSITIVE_NORM

    @property
    def grid(self) -> int:
        return self.components[0].N

    def as_array(self) -> np.ndarray:
        return np.array([c.values for c in self.components])

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "positive": self.positive,
            "method": self.method,
            "iterations": self.iterations,
            "norm": self.norm,
            "sigmas": list(self.sigmas),
            "r_fp": self.r_fp,
            "r_ode": self.r_ode,
            "tol": self.tol,
            "cone": self.cone.as_dict(),
        }


# ------------------------------------------------------------------ guesses


def initial_guess(spec: ProblemSpec, cone: ConeData, level: float,
                  mode: str = "flat-bump") -> list[GridFunction]:
    """Cone-member starting point of amplitude ``level`` for every component."""
    if not level > 0:
        raise ValueError(f"level must be positive, got {level}")
    N = cone.inv_p.N
    if mode == "flat-bump":
        t = grid_nodes(N)
        profile = 4.0 * t * (1.0 - t)
    elif mode == "scaled-floor":
        profile = floor_profile(cone)
        profile = profile / profile.max()
    else:
        raise ValueError(f"initial_guess supports flat-bump and scaled-floor, got {mode!r}")
    return [GridFunction(level * profile, tag=f"u{i + 1}") for i in range(spec.n)]


# ---------------------------------------------------------------- residuals


def _to_grid(U: np.ndarray) -> list[GridFunction]:
    return [GridFunction(np.maximum(row, 0.0)) for row in U]


def _images(out: OperatorOutput) -> np.ndarray:
    return np.array([c.values for c in out.images])


def ode_residual(spec: ProblemSpec, U: np.ndarray) -> float:
    """max over interior nodes of |D[q phi(p u')] + f^i(t, u)| relative to max |f^i|.

    The flux q phi(p u') is taken at half nodes and differenced at the nodes.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    N = U.shape[1] - 1
    h = 1.0 / N
    t = grid_nodes(N)
    half = t[:-1] + 0.5 * h
    p_half = np.broadcast_to(spec.p(half), half.shape)
    q_half = np.broadcast_to(spec.q(half), half.shape)
    worst = 0.0
    for i in range(spec.n):
        flux = q_half * phi(p_half * np.diff(U[i]) / h, spec.phi_exponent)
        f = np.broadcast_to(spec.forcing(i, t, list(U)), t.shape)
        scale = max(float(np.max(np.abs(f))), np.finfo(float).tiny)
        res = np.diff(flux) / h + f[1:-1]
        worst = max(worst, float(np.max(np.abs(res))) / scale)
    return worst


def _bundle(spec: ProblemSpec, U: np.ndarray, cone: ConeData, out: OperatorOutput,
            iterations: int, method: str, tol: float) -> SolutionBundle:
    comps = tuple(GridFunction(row, tag=f"u{i + 1}") for i, row in enumerate(U))
    norm = max(c.sup for c in comps)
    r_fp = float(np.max(np.abs(_images(out) - U)))
    converged = r_fp <= tol * (1.0 + norm)
    return SolutionBundle(
        components=comps,
        sigmas=tuple(float(x) for x in out.sigmas),
        r_fp=r_fp,
        r_ode=ode_residual(spec, U),
        cone=in_cone(comps, cone, tol=1e-8 * (1.0 + norm)),
        norm=norm,
        iterations=iterations,
        converged=converged,
        method=method,
        tol=tol,
    )


def _start(spec: ProblemSpec, config: SolverConfig, cone: ConeData) -> np.ndarray:
    if config.guess == "user":
        U = np.atleast_2d(np.asarray(config.user_guess, dtype=float))
        if U.shape != (spec.n, config.grid + 1):
            raise ValueError(f"user guess must have shape {(spec.n, config.grid + 1)}")
        return U
    level = config.level if config.level is not None else auto_level(spec, config, cone)
    return np.array([g.values for g in initial_guess(spec, cone, level, config.guess)])


def _shape(spec: ProblemSpec, config: SolverConfig, cone: ConeData) -> np.ndarray:
    mode = "flat-bump" if config.guess == "user" else config.guess
    return np.array([g.values for g in initial_guess(spec, cone, 1.0, mode)])


def _log_ratio(spec: ProblemSpec, shape: np.ndarray, level: float) -> float:
    # log(|T(L v)|_0 / L) with a finite floor when T(L v) vanishes
    try:
        norm = apply_T(spec, _to_grid(level * shape)).norm
    except (EvaluationError, OverflowError, FloatingPointError):
        return math.nan
    return math.log(norm / level) if norm > 0 else -745.0


def auto_level(spec: ProblemSpec, config: SolverConfig, cone: ConeData | None = None) -> float:
    """Level L with |T(L v)|_0 = L for the guess profile v; 1 if no match is found.

    Scans two points per decade over 1e-6..1e6 and refines the first sign
    change by Brent's method in log L.
    """
    cone = cone or compute_rho(spec, config.grid)
    shape = _shape(spec, config, cone)
    logs = np.linspace(math.log(LEVEL_RANGE[0]), math.log(LEVEL_RANGE[1]), 25)
    vals = [_log_ratio(spec, shape, math.exp(x)) for x in logs]
    for k in range(len(logs) - 1):
        a, b = vals[k], vals[k + 1]
        if not (math.isfinite(a) and math.isfinite(b)):
            continue
        if a == 0.0:
            return math.exp(logs[k])
        if a * b < 0:
            x = brentq(lambda y: _log_ratio(spec, shape, math.exp(y)), logs[k], logs[k + 1],
                       xtol=1e-12)
            return math.exp(x)
    return 1.0


# ------------------------------------------------------------------- Picard


def picard_solve(spec: ProblemSpec, config: SolverConfig = SolverConfig(),
                 start: np.ndarray | None = None, cone: ConeData | None = None,
                 patience: int | None = None) -> SolutionBundle:
    """Damped Picard iteration u <- (1 - theta) u + theta T u.

    Args:
        spec: Problem to solve.
        config: Solver settings.
        start: Optional starting node values; overrides the configured guess.
        cone: Precomputed cone data for ``config.grid``.
        patience: Stop early after this many iterations without a new best
            residual. The best iterate seen is returned.
    """
    cone = cone or compute_rho(spec, config.grid)
    U = np.maximum(_start(spec, config, cone) if start is None else np.array(start, float), 0.0)
    theta = config.damping
    best: tuple[float, np.ndarray, OperatorOutput, int] | None = None
    stale = 0
    for it in range(config.max_iter + 1):
        try:
            out = apply_T(spec, _to_grid(U))
        except (EvaluationError, OverflowError) as exc:
            # iterates blew up: report the best one seen
            if best is None:
                raise exc
            break
        TU = _images(out)
        norm = float(np.max(np.abs(U)))
        r = float(np.max(np.abs(TU - U)))
        if best is None or r < best[0]:
            best, stale = (r, U, out, it), 0
        else:
            stale += 1
        if r <= config.tol * (1.0 + norm) or it == config.max_iter:
            break
        if patience is not None and stale >= patience:
            break
        U = np.maximum((1.0 - theta) * U + theta * TU, 0.0)
    r, U, out, it = best
    return _bundle(spec, U, cone, out, it, "picard", config.tol)


def matched_solve(spec: ProblemSpec, config: SolverConfig = SolverConfig(),
                  start: np.ndarray | None = None, cone: ConeData | None = None) -> SolutionBundle:
    """Shape iteration v <- T(L v) / L with L re-matched so that |T(L v)|_0 = L.

    At a fixed point u = L v of this map, u = Tu. The amplitude is solved for
    directly, which removes the repelling scaling direction of superlinear
    problems.
    """
    cone = cone or compute_rho(spec, config.grid)
    U = np.maximum(_start(spec, config, cone) if start is None else np.array(start, float), 0.0)
    level = float(np.max(U))
    if level <= 0:
        level, U = 1.0, _shape(spec, config, cone)
    shape = U / level
    best = None
    for it in range(config.max_iter + 1):
        level = _match_level(spec, shape, level)
        if level is None:
            break
        U = level * shape
        try:
            out = apply_T(spec, _to_grid(U))
        except (EvaluationError, OverflowError):
            break
        TU = _images(out)
        r = float(np.max(np.abs(TU - U)))
        if best is None or r < best[0]:
            best = (r, U, out, it)
        if r <= config.tol * (1.0 + level) or it == config.max_iter:
            break
        shape = np.maximum(TU, 0.0) / level
    if best is None:
        return picard_solve(spec, replace(config, max_iter=0), start=U, cone=cone)
    r, U, out, it = best
    return _bundle(spec, U, cone, out, it, "matched", config.tol)


def _match_level(spec: ProblemSpec, shape: np.ndarray, level: float) -> float | None:
    """Root of log(|T(L v)|/L) in log L nearest to ``level``, or None."""
    x0 = math.log(level)
    m0 = _log_ratio(spec, shape, level)
    if not math.isfinite(m0):
        return None
    if m0 == 0.0:
        return level
    step = 0.1
    for _ in range(60):
        for x in (x0 - step, x0 + step):
            m = _log_ratio(spec, shape, math.exp(x))
            if math.isfinite(m) and m * m0 <= 0:
                lo, hi = sorted((x0, x))
                root = brentq(lambda y: _log_ratio(spec, shape, math.exp(y)), lo, hi,
                              xtol=1e-13, rtol=4 * np.finfo(float).eps)
                return math.exp(root)
        step *= 1.5
        if step > 40:
            break
    return None


# ------------------------------------------------------------------- Newton


def _residual(spec: ProblemSpec, x: np.ndarray, N: int) -> tuple[np.ndarray, OperatorOutput]:
    U = _unstack(x, spec.n, N)
    out = apply_T(spec, _to_grid(U))
    return (U - _images(out))[:, 1:-1].ravel(), out


def _unstack(x: np.ndarray, n: int, N: int) -> np.ndarray:
    U = np.zeros((n, N + 1))
    U[:, 1:-1] = x.reshape(n, N - 1)
    return U


def newton_solve(spec: ProblemSpec, config: SolverConfig = SolverConfig(),
                 warm_start: SolutionBundle | np.ndarray | None = None,
                 cone: ConeData | None = None) -> SolutionBundle:
    """Damped Newton on R(U) = U - T(U) over the interior node values.

    The Jacobian is built by forward differences with step 1e-6 (1 + |U_k|);
    each step is halved until the max-norm residual decreases. A singular
    Jacobian or a failed line search ends the run with ``converged=False``.
    """
    cone = cone or compute_rho(spec, config.grid)
    N = config.grid
    if warm_start is None:
        U0 = _start(spec, config, cone)
    elif isinstance(warm_start, SolutionBundle):
        U0 = warm_start.as_array()
    else:
        U0 = np.atleast_2d(np.asarray(warm_start, dtype=float))
    if U0.shape != (spec.n, N + 1):
        raise ValueError(f"warm start must have shape {(spec.n, N + 1)}")
    x = np.maximum(U0[:, 1:-1].ravel(), 0.0)
    R, out = _residual(spec, x, N)
    r = float(np.max(np.abs(R)))
    it = 0
    while it < config.newton_max_iter and r > config.tol * (1.0 + float(np.max(x, initial=0.0))):
        J = np.empty((x.size, x.size))
        for k in range(x.size):
            dx = 1e-6 * (1.0 + abs(x[k]))
            xk = x.copy()
            xk[k] += dx
            J[:, k] = (_residual(spec, xk, N)[0] - R) / dx
        try:
            delta = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(delta)):
            break
        step, accepted = 1.0, False
        for _ in range(30):
            trial = np.maximum(x + step * delta, 0.0)
            try:
                R_t, out_t = _residual(spec, trial, N)
            except (EvaluationError, ValueError, OverflowError):
                step *= 0.5
                continue
            r_t = float(np.max(np.abs(R_t)))
            if r_t < r:
                x, R, out, r, accepted = trial, R_t, out_t, r_t, True
                break
            step *= 0.5
        it += 1
        if not accepted:
            break
    return _bundle(spec, _unstack(x, spec.n, N), cone, out, it, "newton", config.tol)


# --------------------------------------------------------------- dispatcher


def solve(spec: ProblemSpec, config: SolverConfig = SolverConfig()) -> SolutionBundle:
    """Solve with the configured method.

    ``auto`` runs damped Picard until it stalls for ``newton_switch``
    iterations, then the level-matched iteration from the best iterate, then
    Newton from the best result if neither converged.
    """
    cone = compute_rho(spec, config.grid)
    if config.method == "picard":
        return picard_solve(spec, config, cone=cone)
    if config.method == "newton":
        return newton_solve(spec, config, cone=cone)
    start = _start(spec, config, cone)
    best = picard_solve(spec, config, start=start, cone=cone, patience=config.newton_switch)
    total = best.iterations
    if not _good(best):
        # a collapse to u = 0 is a failure here: restart from the initial guess
        matched = matched_solve(spec, config, start=best.as_array() if best.positive else start,
                                cone=cone)
        total += matched.iterations
        best = _better(best, matched)
    if not _good(best) and config.newton_max_iter > 0:
        warm = best.as_array() if best.positive else start
        newton = newton_solve(spec, config, warm_start=warm, cone=cone)
        total += newton.iterations
        best = _better(best, newton)
    return replace(best, iterations=total, method=f"auto:{best.method}")


def _good(b: SolutionBundle) -> bool:
    return b.converged and b.positive


def _better(a: SolutionBundle, b: SolutionBundle) -> SolutionBundle:
    if _good(b) != _good(a):
        return b if _good(b) else a
    if b.positive != a.positive:
        return b if b.positive else a
    return b if b.r_fp < a.r_fp else a


# -------------------------------------------------------------- verification


@dataclass(frozen=True)
class VerificationReport:
    r_fp: float
    r_fp_ok: bool
    sigma_drift: float
    r_ode: float
    boundary_ok: bool
    cone: MembershipReport
    norm: float
    sandwich: bool | None
    alpha: float | None = None
    beta: float | None = None

    @property
    def passed(self) -> bool:
        return (self.r_fp_ok and self.boundary_ok and self.cone.member
                and self.sandwich is not False)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "r_fp": self.r_fp,
            "r_fp_ok": self.r_fp_ok,
            "sigma_drift": self.sigma_drift,
            "r_ode": self.r_ode,
            "boundary_ok": self.boundary_ok,
            "cone": self.cone.as_dict(),
            "norm": self.norm,
            "sandwich": self.sandwich,
            "alpha": self.alpha,
            "beta": self.beta,
        }


def verify_solution(spec: ProblemSpec, bundle: SolutionBundle, alpha: float | None = None,
                    beta: float | None = None, sandwich_slack: float = 1e-6) -> VerificationReport:
    """Re-check a bundle with a fresh operator evaluation.

    The norm sandwich min(alpha, beta) <= |u| <= max(alpha, beta) is checked
    when both radii are given, with ``sandwich_slack`` on the upper side.
    """
    U = bundle.as_array()
    cone = compute_rho(spec, bundle.grid)
    out = apply_T(spec, _to_grid(U))
    norm = float(np.max(np.abs(U)))
    r_fp = float(np.max(np.abs(_images(out) - U)))
    drift = float(np.max(np.abs(np.subtract(out.sigmas, bundle.sigmas))))
    boundary = bool(np.all(U[:, 0] == 0.0) and np.all(U[:, -1] == 0.0))
    sandwich = None
    if alpha is not None and beta is not None:
        sandwich = bool(min(alpha, beta) <= norm <= max(alpha, beta) + sandwich_slack)
    return VerificationReport(
        r_fp=r_fp,
        r_fp_ok=r_fp <= bundle.tol * (1.0 + norm),
        sigma_drift=drift,
        r_ode=ode_residual(spec, U),
        boundary_ok=boundary,
        cone=in_cone(bundle.components, cone, tol=1e-8 * (1.0 + norm)),
        norm=norm,
        sandwich=sandwich,
        alpha=alpha,
        beta=beta,
    )


# -------------------------------------------------------------- multi-start


@dataclass(frozen=True)
class MultiStartReport:
    starts: tuple[float, ...]
    bundles: tuple[SolutionBundle, ...]
    distinct: tuple[SolutionBundle, ...]  # converged positive solutions, pairwise distinct


def multi_start(spec: ProblemSpec, alpha: float, beta: float,
                config: SolverConfig = SolverConfig()) -> MultiStartReport:
    """Solve from levels alpha, beta and sqrt(alpha beta); keep the distinct fixed points.

    Two solutions are distinct when their max-norm difference exceeds
    1e-4 (1 + |u|). Finding several says nothing about completeness.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    levels = (alpha, beta, math.sqrt(alpha * beta))
    bundles = tuple(solve(spec, replace(config, level=lv, guess="flat-bump")) for lv in levels)
    distinct: list[SolutionBundle] = []
    for b in bundles:
        if not (b.converged and b.positive):
            continue
        if all(np.max(np.abs(b.as_array() - d.as_array())) > 1e-4 * (1.0 + b.norm)
               for d in distinct):
            distinct.append(b)
    return MultiStartReport(levels, bundles, tuple(distinct))


# ------------------------------------------------------------------- radial


def radial_ode_residual(rspec: RadialSpec, bundle: SolutionBundle, lam: float = 1.0) -> float:
    """Residual of r^(1-N) (r^(N-1) phi(u_r))_r + lam k_i(r) g^i(u) on the annulus.

    The bundle is a solution of the transformed problem on [0, 1]; node t_j
    maps to r_j = (R2 - R1) t_j + R1. Reported relative to max |lam k_i g^i|.
    """
    U = bundle.as_array()
    N = bundle.grid
    L = rspec.R2 - rspec.R1
    r = rspec.R1 + L * grid_nodes(N)
    dr = L / N
    r_half = r[:-1] + 0.5 * dr
    d = rspec.dimension - 1
    worst = 0.0
    for i in range(rspec.n):
        src = lam * np.broadcast_to(rspec.k_values(i, r), r.shape) \
            * np.broadcast_to(evaluate(rspec.g[i], 0.0, list(U)), r.shape)
        flux = r_half ** d * phi(np.diff(U[i]) / dr, rspec.phi_exponent)
        res = np.diff(flux) / dr / r[1:-1] ** d + src[1:-1]
        scale = max(float(np.max(np.abs(src))), np.finfo(float).tiny)
        worst = max(worst, float(np.max(np.abs(res))) / scale)
    return worst
