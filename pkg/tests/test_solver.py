import numpy as np
import pytest

from cone_bvp.cone import compute_rho, harnack_floor, in_cone
from cone_bvp.operator import apply_T
from cone_bvp.problem import radial_from_dict, radial_to_bvp
from cone_bvp.quadrature import grid_nodes
from cone_bvp.solver import (SolverConfig, auto_level, initial_guess, matched_solve, multi_start,
                             newton_solve, ode_residual, picard_solve, radial_ode_residual, solve,
                             verify_solution)

from conftest import make_spec

CUBIC_PEAK = (2 / 3) * 0.5 ** 1.5


class TestConfig:
    @pytest.mark.parametrize("kw", [{"damping": 0}, {"damping": 1.5}, {"tol": 0}, {"grid": 31},
                                    {"guess": "random"}, {"method": "secant"}, {"level": -1},
                                    {"guess": "user"}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


class TestInitialGuess:
    def test_flat_bump_peak(self, constant8):
        cone = compute_rho(constant8, 64)
        u = initial_guess(constant8, cone, 1.0)[0]
        assert u.values[32] == 1.0 and u.sup == 1.0

    def test_level_must_be_positive(self, constant8):
        with pytest.raises(ValueError):
            initial_guess(constant8, compute_rho(constant8, 64), 0.0)

    def test_flat_bump_in_cone(self, constant8):
        cone = compute_rho(constant8, 64)
        report = in_cone(initial_guess(constant8, cone, 2.0), cone)
        assert report.member
        assert report.margins[0] == pytest.approx(2.0 * (0.75 - 0.25))

    def test_scaled_floor_in_cone(self):
        spec = make_spec(weight_p="1+t")
        cone = compute_rho(spec, 64)
        u = initial_guess(spec, cone, 3.0, "scaled-floor")
        assert in_cone(u, cone, tol=1e-12).member and u[0].sup == pytest.approx(3.0)

    def test_auto_level_matches_norm(self, superlinear):
        # |T(L v)| = L^2 |T v| for g = u^2, so L = 1 / |T v|
        config = SolverConfig(grid=64)
        level = auto_level(superlinear, config)
        shape = initial_guess(superlinear, compute_rho(superlinear, 64), 1.0)
        assert level == pytest.approx(1 / apply_T(superlinear, shape).norm, rel=1e-9)


class TestPicard:
    def test_constant_forcing_one_full_step(self, constant8):
        b = picard_solve(constant8, SolverConfig(grid=128, damping=1.0, level=0.3))
        t = grid_nodes(128)
        assert b.converged and b.iterations == 1
        assert np.max(np.abs(b.components[0].values - 4 * t * (1 - t))) < 1e-12

    def test_cubic_closed_form(self):
        b = picard_solve(make_spec(phi_exponent=3, f=["1"]), SolverConfig())
        assert b.converged
        assert b.norm == pytest.approx(CUBIC_PEAK, abs=1e-6)

    def test_decoupled_copies(self):
        one = picard_solve(make_spec(phi_exponent=2.5, f=["1+t"]), SolverConfig(grid=64))
        two = picard_solve(make_spec(n=2, phi_exponent=2.5, f=["1+t", "1+t"]),
                           SolverConfig(grid=64))
        assert two.converged
        for comp in two.components:
            assert np.allclose(comp.values, one.components[0].values, atol=1e-9)

    def test_iteration_cap_is_a_flag(self):
        b = picard_solve(make_spec(phi_exponent=3, f=["1"]), SolverConfig(grid=64, max_iter=2))
        assert not b.converged and b.iterations <= 2

    def test_user_guess(self, constant8):
        guess = np.full((1, 65), 0.0)
        b = picard_solve(constant8, SolverConfig(grid=64, guess="user", user_guess=guess))
        assert b.converged


class TestNewton:
    def test_warm_start_at_fixed_point(self, constant8):
        t = grid_nodes(64)
        b = newton_solve(constant8, SolverConfig(grid=64), warm_start=np.array([4 * t * (1 - t)]))
        assert b.converged and b.iterations == 0

    def test_cold_start_agrees_with_picard(self):
        spec = make_spec(phi_exponent=2.5, f=["8"])
        config = SolverConfig(grid=32)
        n = newton_solve(spec, config)
        p = picard_solve(spec, config)
        assert n.converged and p.converged
        assert np.max(np.abs(n.as_array() - p.as_array())) < 1e-8

    def test_rescues_superlinear_picard(self, superlinear):
        config = SolverConfig(grid=32)
        pic = picard_solve(superlinear, config, patience=10)
        assert not (pic.converged and pic.positive)
        newton = newton_solve(superlinear, config, warm_start=picard_solve(
            superlinear, SolverConfig(grid=32, max_iter=0)))
        assert newton.converged and newton.positive

    def test_shape_check(self, constant8):
        with pytest.raises(ValueError):
            newton_solve(constant8, SolverConfig(grid=64), warm_start=np.zeros((1, 33)))


class TestAuto:
    def test_superlinear_uses_a_fallback(self, superlinear):
        b = solve(superlinear, SolverConfig(grid=64))
        assert b.converged and b.positive
        assert b.method in ("auto:matched", "auto:newton")

    def test_matched_iteration(self, superlinear):
        b = matched_solve(superlinear, SolverConfig(grid=64))
        assert b.converged and b.positive and b.method == "matched"

    def test_sublinear_picard(self):
        b = solve(make_spec(weight_p="1+t", weight_q="1+t", h=["1+t"], g=["sqrt(u1)+0.1"]),
                  SolverConfig(grid=128))
        assert b.converged and b.method == "auto:picard"


FIXTURES = {
    "constant-linear": (make_spec(f=["8"]), "linear"),
    "cubic": (make_spec(phi_exponent=3, f=["1"]), "cubic"),
    "superlinear": (make_spec(h=["1"], g=["u1^2"]), "linear"),
    "sublinear-weighted": (make_spec(weight_p="1+t", weight_q="1+t", h=["1+t"],
                                     g=["sqrt(u1+0.1)"]), "linear"),
    "system": (make_spec(n=2, h=["1", "1+t"], g=["1+u2", "1+u1/2"]), "linear"),
}


@pytest.fixture(scope="module")
def converged_fixtures():
    return {name: (spec, kind, solve(spec, SolverConfig()))
            for name, (spec, kind) in FIXTURES.items()}


class TestVerification:
    def test_closed_form_residual(self, constant8):
        t = grid_nodes(512)
        u = np.array([4 * t * (1 - t)])
        b = newton_solve(constant8, SolverConfig(), warm_start=u)
        report = verify_solution(constant8, b)
        assert report.passed and report.r_ode <= 1e-6

    def test_zero_function_fails(self, constant8):
        b = newton_solve(constant8, SolverConfig(grid=64, newton_max_iter=0),
                         warm_start=np.zeros((1, 65)))
        assert not verify_solution(constant8, b).r_fp_ok

    def test_sandwich(self, constant8):
        b = solve(constant8, SolverConfig(grid=64))
        assert b.norm == pytest.approx(1.0)
        assert verify_solution(constant8, b, 0.5, 2.0).sandwich is True
        assert verify_solution(constant8, b, 2.0, 3.0).sandwich is False
        assert verify_solution(constant8, b).sandwich is None

    def test_fixed_point_consistency(self, converged_fixtures):
        for name, (spec, _, b) in converged_fixtures.items():
            assert b.converged, name
            report = verify_solution(spec, b)
            assert report.sigma_drift <= 1e-6, name
            assert report.r_fp_ok and report.boundary_ok and report.cone.member, name

    def test_bundle_invariants(self, converged_fixtures):
        for name, (spec, _, b) in converged_fixtures.items():
            U = b.as_array()
            assert np.all(U[:, 0] == 0) and np.all(U[:, -1] == 0), name
            assert b.r_fp <= b.tol * (1 + b.norm), name
            assert b.cone.member, name
            cone = compute_rho(spec, b.grid)
            for comp in b.components:
                assert np.all(comp.values >= harnack_floor(comp, cone).values - 1e-8), name

    def test_residual_duality_linear(self, converged_fixtures):
        for name, (spec, kind, b) in converged_fixtures.items():
            if kind == "linear":
                assert b.r_fp <= 1e-4 * (1 + b.norm) and b.r_ode <= 1e-4, name

    def test_cubic_residual_is_a_local_difference_defect(self):
        # u' ~ |t - sigma|^(1/2) at the peak, so the centered difference misses by O(1)
        # at the peak node; the defect decays like 1/j^2 in node distance j and does
        # not shrink with N
        spec = make_spec(phi_exponent=3, f=["1"])
        profiles = []
        for N in (128, 512):
            b = solve(spec, SolverConfig(grid=N))
            d = np.diff(b.as_array()[0]) * N
            res = np.abs(np.diff(np.abs(d) * d) * N + 1.0)
            dist = np.abs(np.arange(1, N) - N // 2)
            profiles.append([res[dist == j].max() for j in (0, 1, 2, 4, 8, 16, 32)])
            assert res[dist >= 16].max() <= 1e-4
            assert b.r_ode == pytest.approx(res.max())
        assert np.allclose(profiles[0], profiles[1], rtol=1e-3)

    def test_singular_forcing_defect_sits_at_the_boundary(self):
        # g = sqrt(u) has an unbounded slope where u vanishes, i.e. at t = 0 and t = 1
        spec = make_spec(weight_p="1+t", weight_q="1+t", h=["1+t"], g=["sqrt(u1)+0.1"])
        b = solve(spec, SolverConfig())
        assert b.converged and b.r_ode > 1e-4
        U = b.as_array()
        N = b.grid
        t = grid_nodes(N)
        th = t[:-1] + 0.5 / N
        flux = (1 + th) ** 2 * np.diff(U[0]) * N
        f = (1 + t) * (np.sqrt(U[0]) + 0.1)
        res = np.abs(np.diff(flux) * N + f[1:-1]) / f.max()
        assert res[40:-40].max() <= 1e-5
        assert ode_residual(spec, U) == pytest.approx(res.max())


class TestAgreementAndConvergence:
    @pytest.mark.parametrize("spec", [make_spec(phi_exponent=2.5, f=["1+t+u1"]),
                                      make_spec(weight_p="1+t", h=["1"], g=["sqrt(u1)+0.2"])])
    def test_methods_agree(self, spec):
        config = SolverConfig(grid=32)
        p, n = picard_solve(spec, config), newton_solve(spec, config)
        assert p.converged and n.converged
        assert abs(p.norm - n.norm) <= 1e-6
        assert np.max(np.abs(p.as_array() - n.as_array())) <= 1e-6

    def test_grid_convergence_cubic(self):
        spec = make_spec(phi_exponent=3, f=["1"])
        errors = [abs(solve(spec, SolverConfig(grid=N)).norm - CUBIC_PEAK)
                  for N in (64, 128, 256, 512)]
        assert all(a > b for a, b in zip(errors, errors[1:]))


class TestMultiStart:
    def test_superlinear_single_solution(self, superlinear):
        report = multi_start(superlinear, 0.5, 600, SolverConfig(grid=64))
        assert report.starts[2] == pytest.approx(np.sqrt(300))
        assert len(report.distinct) == 1
        assert report.distinct[0].norm == pytest.approx(11.7967, rel=1e-3)

    def test_positive_radii(self, superlinear):
        with pytest.raises(ValueError):
            multi_start(superlinear, 0.0, 1.0)


class TestRadial:
    def test_annulus_residual(self):
        rspec = radial_from_dict({"N": 2, "R1": 1, "R2": 2, "k": ["1"], "g": ["1+u1/4"]}, 1, 2.0)
        b = solve(radial_to_bvp(rspec), SolverConfig())
        assert b.converged
        assert radial_ode_residual(rspec, b) <= 1e-5

    def test_three_dimensional_annulus(self):
        rspec = radial_from_dict({"N": 3, "R1": 1, "R2": 3, "k": ["r"], "g": ["1+u1"]}, 1, 2.0)
        b = solve(radial_to_bvp(rspec), SolverConfig(grid=256))
        assert b.converged
        assert radial_ode_residual(rspec, b) <= 1e-4
