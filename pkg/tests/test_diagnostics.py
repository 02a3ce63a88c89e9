"""Pathwise inequality checks, rate fitting, Monte Carlo aggregation."""

import numpy as np
import pytest

from opsplit.diagnostics import (
    InequalityReport,
    aggregate_expectation,
    check_lemma_main,
    check_lemma_qes,
    check_t_lower_bound,
    fit_rate,
)
from opsplit.operators import LipschitzMonotoneMap, scaled_identity, zero_map
from opsplit.problems import InclusionProblem, make_affine_inclusion
from opsplit.schedules import StepSchedule, burn_in_n0
from opsplit.solvers import run

RNG = np.random.default_rng(31)


def _scalar_recursion(budget=50):
    B = LipschitzMonotoneMap(lambda x: x.copy(), mu=1.0, nu_b=1.0, dim=1,
                             linear_matrix=np.eye(1), offset=np.zeros(1))
    prob = InclusionProblem(A=scaled_identity(0.0, dim=1), B=B, dim=1,
                            mu=1.0, nu=0.0, known_zero=np.zeros(1))
    sched = StepSchedule("constant", gamma=0.4)
    traj = run(prob, "srfb", sched, budget, x0=[1.0], keep_iterates=True)
    return prob, sched, traj


class TestInequalityReport:
    def test_relative_tolerance(self):
        assert InequalityReport(0, 1.0, 1.0).passed
        assert InequalityReport(0, 1.0 + 1e-11, 1.0).passed
        assert not InequalityReport(0, 1.0 + 1e-9, 1.0).passed
        # tolerance scales with |rhs|
        assert InequalityReport(0, 1e6 + 1e-5, 1e6).passed

    def test_slack(self):
        r = InequalityReport(3, 1.0, 4.0)
        assert r.slack == 3.0


class TestLemmaMain:
    def test_scalar_recursion_passes(self):
        prob, _, traj = _scalar_recursion()
        reports = check_lemma_main(traj, prob, np.zeros(1))
        assert len(reports) == traj.steps - 1
        assert all(r.passed for r in reports)

    def test_frozen_at_zero_trivial(self):
        prob, sched, _ = _scalar_recursion()
        traj = run(prob, "srfb", sched, 20, x0=[0.0], keep_iterates=True)
        reports = check_lemma_main(traj, prob, np.zeros(1))
        assert all(r.passed for r in reports)
        assert all(abs(r.lhs) <= 1e-15 and abs(r.rhs) <= 1e-15 for r in reports)

    def test_corruption_detected(self):
        prob, _, traj = _scalar_recursion()
        traj.iterates[6] = traj.iterates[6] + 1.0  # perturb x_5
        reports = check_lemma_main(traj, prob, np.zeros(1))
        assert any(not r.passed for r in reports)

    def test_stochastic_trajectory_refused(self):
        prob = make_affine_inclusion(4, 1.0, 1.0, seed=0)
        noise = {"noise": "gaussian", "variance": {"kind": "power", "c": 1.0,
                                                   "p": 2.0}}
        traj = run(prob, "srfb", StepSchedule("constant", gamma=0.1), 20,
                   noise=noise, keep_iterates=True)
        with pytest.raises(ValueError):
            check_lemma_main(traj, prob, prob.known_zero)

    def test_needs_iterates(self):
        prob = make_affine_inclusion(4, 1.0, 1.0, seed=0)
        traj = run(prob, "srfb", StepSchedule("constant", gamma=0.1), 20)
        with pytest.raises(ValueError):
            check_lemma_main(traj, prob, prob.known_zero)

    def test_affine_problems_pass(self):
        for seed in range(5):
            prob = make_affine_inclusion(6, 1.0, 2.0, seed=seed)
            sched = StepSchedule("strongly_monotone", nu=1.0)
            traj = run(prob, "srfb", sched, 80, keep_iterates=True)
            reports = check_lemma_main(traj, prob, prob.known_zero)
            assert all(r.passed for r in reports)


class TestLemmaQes:
    def test_zero_operator(self):
        B = zero_map(dim=1)
        prob = InclusionProblem(A=scaled_identity(1.0, dim=1), B=B, dim=1,
                                mu=0.0, nu=1.0, known_zero=np.zeros(1))
        traj = run(prob, "srfb", StepSchedule("constant", gamma=0.4), 20,
                   x0=[1.0], keep_iterates=True, force=True)
        reports = check_lemma_qes(traj, B, 0.0)
        assert all(r.lhs == 0.0 and r.passed for r in reports)

    def test_stationary_trajectory(self):
        prob, sched, _ = _scalar_recursion()
        traj = run(prob, "srfb", sched, 15, x0=[0.0], keep_iterates=True)
        reports = check_lemma_qes(traj, prob.B, prob.mu)
        assert all(r.passed and abs(r.slack) <= 1e-15 for r in reports)

    def test_scalar_recursion(self):
        prob, _, traj = _scalar_recursion()
        reports = check_lemma_qes(traj, prob.B, prob.mu)
        assert len(reports) == traj.steps
        assert all(r.passed for r in reports)


class TestTLowerBound:
    def test_stationary_at_reference(self):
        prob = make_affine_inclusion(4, 1.0, 1.0, seed=2)
        sched = StepSchedule("strongly_monotone", nu=1.0)
        traj = run(prob, "srfb", sched, 10, x0=prob.known_zero,
                   keep_iterates=True)
        reports = check_t_lower_bound(traj, prob.known_zero, sched, prob.mu)
        assert all(r.passed for r in reports)
        assert all(abs(r.lhs) <= 1e-18 for r in reports)

    def test_strongly_monotone_run_past_burn_in(self):
        prob = make_affine_inclusion(6, 1.0, 2.0, seed=4)
        sched = StepSchedule("strongly_monotone", nu=1.0)
        traj = run(prob, "srfb", sched, 200, keep_iterates=True)
        n0 = burn_in_n0(1.0, prob.mu)
        reports = check_t_lower_bound(traj, prob.known_zero, sched, prob.mu)
        assert all(r.passed for r in reports if r.n > n0)

    def test_early_indices_reported_not_asserted(self):
        # with a large mu the bound can fail before the burn-in index;
        # the checker must still return those rows
        prob = make_affine_inclusion(6, 0.05, 3.0, seed=6)
        sched = StepSchedule("strongly_monotone", nu=0.05)
        traj = run(prob, "srfb", sched, 50, keep_iterates=True, force=True)
        reports = check_t_lower_bound(traj, prob.known_zero, sched, prob.mu)
        assert len(reports) == traj.steps + 1
        n0 = burn_in_n0(0.05, prob.mu)
        late = [r for r in reports if r.n > n0]
        assert all(r.passed for r in late)


class TestFitRate:
    def test_exact_power_law(self):
        n = np.arange(1, 2001)
        slope, intercept = fit_rate((n, 7.0 / n), (10, 2000))
        assert slope == pytest.approx(-1.0, abs=1e-9)
        assert np.exp(intercept) == pytest.approx(7.0, rel=1e-6)

    def test_flat_series(self):
        n = np.arange(1, 1001)
        slope, _ = fit_rate((n, np.full(1000, 3.3)), (1, 1000))
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_log_over_n(self):
        n = np.arange(1000, 100_001)
        slope, _ = fit_rate((n, np.log(n) / n), (1000, 100_000))
        assert -1.0 <= slope <= -0.85

    def test_nonpositive_values_listed(self):
        n = np.arange(1, 11)
        v = np.ones(10)
        v[4] = 0.0
        with pytest.raises(ValueError) as exc:
            fit_rate((n, v), (1, 10))
        assert "4" in str(exc.value)

    def test_tuple_series_input(self):
        series = [(10, 1.0), (100, 0.1), (1000, 0.01)]
        slope, _ = fit_rate(series, (10, 1000))
        assert slope == pytest.approx(-1.0, abs=1e-12)

    def test_window_too_small(self):
        with pytest.raises(ValueError):
            fit_rate((np.array([1, 2, 3]), np.ones(3)), (10, 20))


class TestAggregate:
    def _mk(self, values, ns=None):
        from opsplit.solvers import Trajectory
        values = np.asarray(values, dtype=float)
        ns = np.arange(1, values.size + 1) if ns is None else np.asarray(ns)
        return Trajectory(
            solver="srfb", seed=0, ns=ns, gammas=np.full(values.size, 0.1),
            resid=values.copy(), draw_err_sq=np.zeros(values.size),
            wall_ns=np.zeros(values.size, dtype=np.int64), dist_sq=values)

    def test_identical_trajectories(self):
        t = [self._mk([1.0, 2.0, 3.0]) for _ in range(4)]
        ns, mean, stderr = aggregate_expectation(t)
        assert np.array_equal(mean, [1.0, 2.0, 3.0])
        assert np.array_equal(stderr, np.zeros(3))

    def test_two_point_sample(self):
        ns, mean, stderr = aggregate_expectation(
            [self._mk([1.0]), self._mk([3.0])])
        assert mean[0] == pytest.approx(2.0)
        assert stderr[0] == pytest.approx(1.0)

    def test_misaligned_grids(self):
        with pytest.raises(ValueError):
            aggregate_expectation(
                [self._mk([1.0, 2.0]), self._mk([1.0, 2.0], ns=[1, 3])])

    def test_needs_two_seeds(self):
        with pytest.raises(ValueError):
            aggregate_expectation([self._mk([1.0])])

    def test_exact_runs_identical_across_seeds(self):
        prob = make_affine_inclusion(4, 1.0, 1.0, seed=0)
        sched = StepSchedule("constant", gamma=0.1)
        # power-of-two seed count keeps the mean of identical values exact
        trajs = [run(prob, "srfb", sched, 30, seed=s) for s in (1, 2, 3, 4)]
        assert all(np.array_equal(t.dist_sq, trajs[0].dist_sq) for t in trajs)
        ns, mean, stderr = aggregate_expectation(trajs)
        assert np.array_equal(mean, trajs[0].dist_sq)
        assert np.max(stderr) == 0.0
