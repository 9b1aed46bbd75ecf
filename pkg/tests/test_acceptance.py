"""Acceptance criteria; each test prints one PASS/FAIL line to the terminal."""

import json
import math

import numpy as np
import pytest

from cone_bvp.analysis import (GammaEvaluator, check_D1_D2, check_h1_h2, compute_B_i,
                               eigenvalue_intervals, lambda_sweep, minimize_gamma, proof_weights)
from cone_bvp.cli import main
from cone_bvp.cone import compute_rho, harnack_floor, in_cone
from cone_bvp.operator import apply_T
from cone_bvp.problem import radial_from_dict, radial_to_bvp
from cone_bvp.quadrature import grid_nodes
from cone_bvp.solver import SolverConfig, radial_ode_residual, solve, verify_solution

from conftest import make_spec, random_cone_member, random_spec


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail

    return emit


def test_01_rho(report):
    const = compute_rho(make_spec(weight_p="3.7"), 512).rho
    affine = compute_rho(make_spec(weight_p="1+t"), 512).rho
    want = math.log(8 / 7) / math.log(2)
    ok = abs(const - 0.25) <= 1e-12 and abs(affine - want) <= 1e-10
    report(1, "rho reproduction", ok,
           f"constant |rho-1/4| = {abs(const - 0.25):.1e}, 1+t |rho-ln(8/7)/ln2| = "
           f"{abs(affine - want):.1e}")


def test_02_linear_closed_form(report):
    b = solve(make_spec(f=["8"]), SolverConfig(grid=512))
    t = grid_nodes(512)
    err = float(np.max(np.abs(b.components[0].values - 4 * t * (1 - t))))
    sigma_err = abs(b.sigmas[0] - 0.5)
    ok = b.converged and err <= 1e-6 and sigma_err <= 1e-8 and b.r_ode <= 1e-6
    report(2, "linear closed form", ok,
           f"max error {err:.1e}, |sigma-1/2| = {sigma_err:.1e}, r_ode = {b.r_ode:.1e}")


def test_03_p_laplacian_closed_form(report):
    b = solve(make_spec(phi_exponent=3, f=["1"]), SolverConfig(grid=512))
    want = (2 / 3) * 0.5 ** 1.5
    err = abs(b.norm - want)
    report(3, "p-Laplacian closed form", b.converged and err <= 1e-6,
           f"|u| = {b.norm:.10f}, oracle {want:.10f}, error {err:.1e}")


def test_04_cone_invariance(report):
    rng = np.random.default_rng(2024)
    passed = total = 0
    worst = math.inf
    for _ in range(5):
        spec = random_spec(rng)
        cone = compute_rho(spec, 128)
        for _ in range(20):
            u = random_cone_member(rng, cone, spec.n)
            out = apply_T(spec, u)
            tol = 1e-10 * (1 + out.norm)
            rep = in_cone(out.images, cone, tol=tol)
            passed += rep.member
            total += 1
            worst = min(worst, min(rep.margins + rep.negativity) / (1 + out.norm))
    report(4, "cone invariance", passed == total == 100,
           f"{passed}/{total} images in the cone, worst relative margin {worst:.1e}")


FIXTURES = {
    "constant": make_spec(f=["8"]),
    "superlinear": make_spec(h=["1"], g=["u1^2"]),
    "cubic": make_spec(phi_exponent=3, f=["1"]),
    "weighted": make_spec(weight_p="1+t", weight_q="1+t", h=["1+t"], g=["sqrt(u1+0.1)"]),
    "system": make_spec(n=2, phi_exponent=1.5, weight_p="2-t", weight_q="1+t^2",
                        f=["1+u2^2", "2+t*u1"]),
}


def test_05_harnack_bound(report):
    worst, failed = math.inf, []
    for name, spec in FIXTURES.items():
        b = solve(spec, SolverConfig(grid=256))
        assert b.converged and b.positive, name
        cone = compute_rho(spec, 256)
        for comp in b.components:
            gap = float(np.min(comp.values - harnack_floor(comp, cone).values))
            worst = min(worst, gap)
            if gap < -1e-8:
                failed.append(name)
    report(5, "Harnack bound", not failed,
           f"{len(FIXTURES)} fixtures, min(u - floor) = {worst:.1e}, failures {failed}")


def test_06_B_oracle(report):
    unit = make_spec(h=["1"], g=["u1"])
    m = minimize_gamma(unit, unit.nonlinearity.h[0])
    ok = abs(m.value - 1 / 128) <= 1e-8 and abs(m.t - 0.5) <= 1e-6
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(5):
        a, b, c = rng.uniform(0.2, 2, 3)
        h = f"{a:.6f}+{b:.6f}*sin({c * 4:.6f}*t)^2"
        spec = make_spec(weight_p=f"1+{c:.6f}*t", weight_q="1+t", h=[h], g=["u1"])
        brute = GammaEvaluator(spec, spec.nonlinearity.h[0]).many(
            np.linspace(0.25, 0.75, 10_000)).min()
        worst = max(worst, abs(compute_B_i(spec, 0) - brute))
    ok = ok and worst <= 1e-8
    report(6, "B_i oracle", ok,
           f"B = {m.value:.12f} at t = {m.t:.8f}, worst brute-force gap {worst:.1e}")


def test_07_superlinear_pipeline(report):
    spec = make_spec(h=["1"], g=["u1^2"])
    h1 = check_h1_h2(spec).holds("h1")
    interval = eigenvalue_intervals(spec).interval_s
    lams = [1e-2, 1e-1, 1, 10, 1e2]
    sweep = lambda_sweep(spec, interval, len(lams), SolverConfig(grid=256), lambdas=lams)
    rows_ok = [r.converged and r.positive and r.r_fp <= 1e-8 * (1 + r.norm) for r in sweep.rows]
    ok = h1 and interval == (0.0, math.inf) and len(rows_ok) == 5 and all(rows_ok)
    report(7, "superlinear pipeline", ok,
           f"h1 = {h1}, interval_s = {interval}, converged at "
           f"{sum(rows_ok)}/5 lambdas, norms {[f'{r.norm:.4g}' for r in sweep.rows]}")


def test_08_sandwich(report):
    spec = make_spec(h=["1"], g=["u1^2"])
    alpha, beta = 600.0, 0.5
    psi, varphi = proof_weights(spec)
    hyp = check_D1_D2(spec, alpha, beta, psi, varphi)
    b = solve(spec, SolverConfig())
    check = verify_solution(spec, b, alpha, beta)
    inside = min(alpha, beta) <= b.norm <= max(alpha, beta) + 1e-6
    ok = hyp.passed and b.converged and inside and check.sandwich
    report(8, "norm sandwich", ok,
           f"D1/D2 {hyp.verdicts}, |u| = {b.norm:.6g} in [{beta}, {alpha}]")


def test_09_homogeneity(report):
    rng = np.random.default_rng(9)
    worst = 0.0
    for expo in (1.5, 2.0, 3.0):
        base = "1+t+u1^2/(1+u1)"
        spec = make_spec(phi_exponent=expo, weight_p="1+t/2", weight_q="1+t", f=[base])
        cone = compute_rho(spec, 256)
        u = random_cone_member(rng, cone, 1)
        Tu = apply_T(spec, u).images[0].values
        for c in (0.1, 2.0, 10.0):
            scaled = make_spec(phi_exponent=expo, weight_p="1+t/2", weight_q="1+t",
                               f=[f"{c ** (expo - 1)!r}*({base})"])
            Tc = apply_T(scaled, u).images[0].values
            worst = max(worst, float(np.max(np.abs(Tc - c * Tu)) / np.max(np.abs(c * Tu))))
    report(9, "homogeneity", worst <= 1e-10, f"worst relative error {worst:.1e}")


def test_10_radial(report):
    rspec = radial_from_dict({"N": 2, "R1": 1, "R2": 2, "k": ["1"], "g": ["1+u1/4"]}, 1, 2.0)
    b = solve(radial_to_bvp(rspec), SolverConfig())
    res = radial_ode_residual(rspec, b)
    report(10, "radial consistency", b.converged and res <= 1e-5,
           f"relative radial residual {res:.1e}, |u| = {b.norm:.6g}")


def test_11_determinism(report, tmp_path):
    problem = tmp_path / "p.json"
    problem.write_text(json.dumps({"n": 1, "phi_exponent": 2, "weight_p": "1+t",
                                   "weight_q": "1+t", "h": ["1"], "g": ["u1^2"]}))
    flags = ["--grid", "64", "--lambda-min", "0.1", "--lambda-max", "10", "--points", "3"]
    codes = [main(["sweep", str(problem), *flags, "--out", str(tmp_path / d)]) for d in "ab"]
    a, b = ((tmp_path / d / "sweep.csv").read_bytes() for d in "ab")
    same = a == b
    report(11, "determinism", codes == [0, 0] and same,
           f"exit codes {codes}, byte-identical CSV: {same}")
