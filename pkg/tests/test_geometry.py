import math

import numpy as np
import pytest

import relent as R
from conftest import feasible_classical_l, random_density, random_features, random_problem, random_space

TWO = R.FiniteSpace(["a", "b"], [1.0, 1.0])
UNIFORM2 = R.Density(TWO, [0.5, 0.5])
U2 = R.FeatureSet(TWO, [[0.0, 1.0]], ["u1"])

THREE = R.FiniteSpace(["a", "b", "c"], [1.0, 1.0, 1.0])
UNIFORM3 = R.Density(THREE, [1 / 3] * 3)
U3 = R.FeatureSet(THREE, [[0.0, 1.0, 2.0]], ["u1"])


def two_point_family():
    return R.line_family(R.Density(TWO, [0.98, 0.02]), R.Density(TWO, [0.02, 0.98]))


class TestClassicalPythagoras:
    def test_degenerate_triangle(self):
        res = R.solve_classical(UNIFORM3, U3, R.MomentSpec.classical([1.2]))
        rep = R.verify_classical_pythagoras(UNIFORM3, U3, [1.2], res.posterior)
        assert rep.I_lp == pytest.approx(0.0, abs=1e-12)
        assert abs(rep.triangle_residual) < 1e-10

    def test_three_point_line(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            l = feasible_classical_l(rng, UNIFORM3, U3, np.array([1.2]))
            rep = R.verify_classical_pythagoras(UNIFORM3, U3, [1.2], l)
            assert abs(rep.triangle_residual) < 1e-8
            # consequence: the projection is closer to r than any feasible l
            assert rep.I_lr >= rep.I_pr - 1e-10
            assert rep.regime is R.ConstraintKind.CLASSICAL
            assert rep.inequality == "="
            assert rep.cross_term == 0.0

    def test_violating_l_rejected_with_named_feature(self):
        l = R.Density(THREE, [0.5, 0.3, 0.2])
        with pytest.raises(R.PreconditionError, match="u1"):
            R.verify_classical_pythagoras(UNIFORM3, U3, [1.2], l)

    def test_randomized_instances(self):
        rng = np.random.default_rng(101)
        for _ in range(20):
            n = int(rng.integers(3, 6))
            m = 1 if n < 4 else int(rng.integers(1, 3))
            r, u, spec = random_problem(rng, n, R.ConstraintKind.CLASSICAL, 1.0, m=m)
            l = feasible_classical_l(rng, r, u, spec.targets)
            rep = R.verify_classical_pythagoras(r, u, spec.targets, l)
            assert abs(rep.triangle_residual) < 1e-8


class TestExpectationMatchingScan:
    def test_argmin_at_test_density_moments(self):
        l = R.Density(TWO, [0.4, 0.6])
        grid = [[0.5 + 0.01 * i] for i in range(21)]
        scan = R.scan_expectation_matching_classical(UNIFORM2, U2, l, grid)
        assert scan.l_moments == pytest.approx([0.6])
        assert scan.argmin_targets == pytest.approx((0.6,))
        assert scan.argmin_index == scan.closest_index

    def test_argmin_invariant_to_prior(self):
        l = R.Density(TWO, [0.4, 0.6])
        grid = [[0.5 + 0.01 * i] for i in range(21)]
        for prior_vals in ([0.45, 0.55], [0.7, 0.3], [0.25, 0.75]):
            scan = R.scan_expectation_matching_classical(
                R.Density(TWO, prior_vals), U2, l, grid
            )
            assert scan.argmin_targets == pytest.approx((0.6,))

    def test_grid_must_cover_moments(self):
        l = R.Density(TWO, [0.4, 0.6])
        with pytest.raises(R.PreconditionError):
            R.scan_expectation_matching_classical(UNIFORM2, U2, l, [[0.1], [0.2]])

    def test_infeasible_grid_points_flagged(self):
        l = R.Density(TWO, [0.4, 0.6])
        grid = [[0.5], [0.6], [1.0]]  # 1.0 sits on the hull boundary
        scan = R.scan_expectation_matching_classical(UNIFORM2, U2, l, grid)
        assert not scan.entries[2].converged
        assert scan.entries[2].I_lp == math.inf
        assert scan.argmin_targets == pytest.approx((0.6,))


class TestNonextensivePythagorasQ:
    def test_l_equal_p_gives_zero_residuals(self):
        spec = R.MomentSpec.q_expectation([0.49], 2.0)
        res = R.solve_tsallis_q(UNIFORM2, U2, spec)
        rep = R.verify_nonextensive_pythagoras_q(UNIFORM2, U2, [0.49], res.posterior, 2.0)
        assert np.max(np.abs(rep.matching_residuals)) < 1e-9
        assert abs(rep.triangle_residual) < 1e-9
        assert rep.I_lp == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("q", [0.5, 1.5, 2.0])
    def test_two_point_bisection(self, q):
        t = 0.7**q  # q-moment of (0.3, 0.7) for u = (0, 1)
        res = R.solve_tsallis_q(UNIFORM2, U2, R.MomentSpec.q_expectation([t], q))
        fam = two_point_family()
        f = lambda s: float(R.matching_residuals_q(res, U2, fam(s))[0])
        s_star, resid = R.bisect_scalar(f, 0.01, 0.99, residual_tol=1e-10)
        assert abs(resid) <= 1e-10
        rep = R.verify_nonextensive_pythagoras_q(UNIFORM2, U2, [t], fam(s_star), q)
        assert abs(rep.triangle_residual) < 1e-8
        assert rep.inequality == ("<=" if q < 1 else ">=")

    @pytest.mark.parametrize("q", [0.5, 1.5, 2.0])
    def test_three_point_nontrivial_matching_density(self, q):
        rng = np.random.default_rng(77)
        p0 = R.Density(THREE, [0.22, 0.33, 0.45])
        t = R.q_expectation(U3.values[0], p0, q)
        res = R.solve_tsallis_q(UNIFORM3, U3, R.MomentSpec.q_expectation([t], q))
        for _ in range(40):
            fam = R.line_family(random_density(rng, THREE), random_density(rng, THREE))
            f = lambda s: float(R.matching_residuals_q(res, U3, fam(s))[0])
            grid = np.linspace(0.0, 1.0, 17)
            vals = [f(s) for s in grid]
            bracket = next(
                (
                    (grid[i], grid[i + 1])
                    for i in range(len(grid) - 1)
                    if math.copysign(1, vals[i]) != math.copysign(1, vals[i + 1])
                ),
                None,
            )
            if bracket is None:
                continue
            s_star, resid = R.bisect_scalar(f, *bracket, residual_tol=1e-10)
            l_star = fam(s_star)
            if np.max(np.abs(l_star.values - res.posterior.values)) < 0.02:
                continue  # want a matching density distinct from the projection
            rep = R.verify_nonextensive_pythagoras_q(UNIFORM3, U3, [t], l_star, q)
            assert rep.I_lp > 1e-5
            assert abs(rep.triangle_residual) < 1e-8
            return
        pytest.fail("no nontrivial matching density found along random families")

    def test_cross_term_sign_tracks_regime(self):
        fam = two_point_family()
        for q in (0.5, 2.0):
            t = 0.7**q
            for s in np.linspace(0.05, 0.95, 10):
                rep = R.verify_nonextensive_pythagoras_q(UNIFORM2, U2, [t], fam(s), q)
                if q > 1:
                    assert rep.cross_term >= 0.0
                else:
                    assert rep.cross_term <= 0.0

    def test_rejects_classical_q(self):
        with pytest.raises(ValueError):
            R.verify_nonextensive_pythagoras_q(UNIFORM2, U2, [0.7], UNIFORM2, 1.0)


class TestNonextensivePythagorasNormalized:
    def test_l_equal_p(self):
        t = 0.49 / 0.58
        res = R.solve_tsallis_normalized(UNIFORM2, U2, R.MomentSpec.normalized_q([t], 2.0))
        rep = R.verify_nonextensive_pythagoras_normalized(
            UNIFORM2, U2, [t], res.posterior, 2.0
        )
        assert abs(rep.triangle_residual) < 1e-9

    @pytest.mark.parametrize("q", [0.5, 1.5, 2.0])
    def test_two_point_bisection(self, q):
        p0 = R.Density(TWO, [0.3, 0.7])
        t = R.normalized_q_expectation(U2.values[0], p0, q)
        fam = two_point_family()
        g = lambda s: float(
            R.constraint_moments(U2, fam(s), R.ConstraintKind.NORMALIZED_Q, q)[0] - t
        )
        s_star, resid = R.bisect_scalar(g, 0.01, 0.99, residual_tol=1e-10)
        rep = R.verify_nonextensive_pythagoras_normalized(UNIFORM2, U2, [t], fam(s_star), q)
        assert abs(rep.triangle_residual) < 1e-8

    @pytest.mark.parametrize("q", [0.5, 1.5, 2.0])
    def test_three_point_nontrivial(self, q):
        rng = np.random.default_rng(13)
        p0 = R.Density(THREE, [0.22, 0.33, 0.45])
        t = R.normalized_q_expectation(U3.values[0], p0, q)
        res = R.solve_tsallis_normalized(UNIFORM3, U3, R.MomentSpec.normalized_q([t], q))
        for _ in range(40):
            fam = R.line_family(random_density(rng, THREE), random_density(rng, THREE))
            g = lambda s: float(
                R.constraint_moments(U3, fam(s), R.ConstraintKind.NORMALIZED_Q, q)[0] - t
            )
            grid = np.linspace(0.0, 1.0, 17)
            vals = [g(s) for s in grid]
            bracket = next(
                (
                    (grid[i], grid[i + 1])
                    for i in range(len(grid) - 1)
                    if math.copysign(1, vals[i]) != math.copysign(1, vals[i + 1])
                ),
                None,
            )
            if bracket is None:
                continue
            s_star, _ = R.bisect_scalar(g, *bracket, residual_tol=1e-11)
            l_star = fam(s_star)
            if np.max(np.abs(l_star.values - res.posterior.values)) < 0.02:
                continue
            rep = R.verify_nonextensive_pythagoras_normalized(
                UNIFORM3, U3, [t], l_star, q
            )
            assert rep.I_lp > 1e-5
            assert abs(rep.triangle_residual) < 1e-8
            return
        pytest.fail("no nontrivial constraint-satisfying density found")

    def test_mismatched_l_rejected(self):
        with pytest.raises(R.PreconditionError, match="u1"):
            R.verify_nonextensive_pythagoras_normalized(
                UNIFORM2, U2, [0.49 / 0.58], R.Density(TWO, [0.45, 0.55]), 2.0
            )

    def test_classical_limit_matches_classical_report(self):
        l = R.Density(TWO, [0.4, 0.6])
        classical = R.verify_classical_pythagoras(UNIFORM2, U2, [0.6], l)
        for q in (1.0 - 1e-6, 1.0 + 1e-6):
            res = R.solve_tsallis_normalized(
                UNIFORM2, U2, R.MomentSpec.normalized_q([0.6], q)
            )
            I_lp = R.tsallis_relative_entropy(l, res.posterior, q)
            assert abs(I_lp - classical.I_lp) < 1e-5
            assert abs(res.divergence - classical.I_pr) < 1e-5


class TestThermodynamicIdentities:
    def test_classical_worked_example(self):
        spec = R.MomentSpec.classical([0.7])
        out = R.check_thermodynamic_identities(UNIFORM2, U2, spec)
        assert out["dlnZ_dbeta"] < 1e-5
        assert out["dI_dmoment"] < 1e-5

    def test_classical_derivative_value(self):
        # dI/d<u> = -beta = ln(7/3) at the worked point
        spec = R.MomentSpec.classical([0.7])
        h = 1e-5
        hi = R.solve_classical(UNIFORM2, U2, R.MomentSpec.classical([0.7 + h]))
        lo = R.solve_classical(UNIFORM2, U2, R.MomentSpec.classical([0.7 - h]))
        fd = (hi.divergence - lo.divergence) / (2 * h)
        assert fd == pytest.approx(math.log(7.0 / 3.0), abs=1e-6)
        assert fd == pytest.approx(0.8473, abs=1e-4)

    def test_beta_zero_solve_matches_prior_moments(self):
        # at beta = 0 the log-partition slope is minus the prior's moment
        r = R.Density(TWO, [0.4, 0.6])
        h = 1e-5
        fd = (
            math.log(R.partition_classical(r, U2, [h]))
            - math.log(R.partition_classical(r, U2, [-h]))
        ) / (2 * h)
        assert fd == pytest.approx(-0.6, abs=1e-8)

    def test_q_expectation_worked_example(self):
        spec = R.MomentSpec.q_expectation([0.49], 2.0)
        out = R.check_thermodynamic_identities(UNIFORM2, U2, spec)
        assert out["dlnZ_dbeta"] < 1e-5
        assert out["dI_dmoment"] < 1e-5

    def test_q_partition_derivative_value(self):
        res = R.solve_tsallis_q(UNIFORM2, U2, R.MomentSpec.q_expectation([0.49], 2.0))
        h = 1e-5
        fd = (
            R.q_log(R.partition_q(UNIFORM2, U2, res.beta + h, 2.0), 2.0)
            - R.q_log(R.partition_q(UNIFORM2, U2, res.beta - h, 2.0), 2.0)
        ) / (2 * h)
        assert fd == pytest.approx(-0.49, abs=1e-6)

    def test_normalized_regime(self):
        spec = R.MomentSpec.normalized_q([0.49 / 0.58], 2.0)
        out = R.check_thermodynamic_identities(UNIFORM2, U2, spec)
        assert out["dlnZ_dbeta"] < 1e-5
        assert out["dI_dmoment"] < 1e-5
        assert out["lnq_partition_relation"] < 1e-9

    def test_multi_feature_classical(self):
        rng = np.random.default_rng(55)
        r, u, spec = random_problem(rng, 4, R.ConstraintKind.CLASSICAL, 1.0, m=2)
        out = R.check_thermodynamic_identities(r, u, spec)
        assert out["dlnZ_dbeta"] < 1e-5
        assert out["dI_dmoment"] < 1e-5


class TestClassicalLimitOfReports:
    def test_q_report_approaches_classical(self):
        l = R.Density(TWO, [0.4, 0.6])
        classical = R.verify_classical_pythagoras(UNIFORM2, U2, [0.6], l)
        for q in (1.0 - 1e-6, 1.0 + 1e-6):
            rep = R.verify_nonextensive_pythagoras_q(UNIFORM2, U2, [0.6], l, q)
            assert abs(rep.I_lr - classical.I_lr) < 1e-4
            assert abs(rep.I_lp - classical.I_lp) < 1e-4
            assert abs(rep.I_pr - classical.I_pr) < 1e-4
            assert abs(rep.triangle_residual - classical.triangle_residual) < 1e-4
