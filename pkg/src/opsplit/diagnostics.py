"""Per-iteration metrics, pathwise inequality checks, rate estimation.

The inequality checks evaluate, along a stored deterministic trajectory,
the two estimates that drive the convergence analysis of the reflected
iteration (both specialised to the merely monotone case, where the
uniform-monotonicity slack vanishes):

* the one-step descent estimate tying ||x_{n+1} - x||^2 to
  ||x_n - x||^2 through the reflected cross terms;
* the Cauchy-Schwarz bound on 2 <B y_{n-1} - B y_n, x_{n+1} - y_n> by
  mu-weighted squared distances;
* the lower bound T_n >= ||x_n - x||^2 / (2 gamma_n) on the Lyapunov
  quantity of the strongly monotone rate analysis (valid once
  1/(2 gamma_n) >= mu, i.e. past the burn-in index).

They are restricted to exact-oracle runs: with noise the same algebra
holds only in conditional expectation, so a pathwise assertion would be
meaningless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RunRecord",
    "InequalityReport",
    "check_lemma_main",
    "check_lemma_qes",
    "check_t_lower_bound",
    "fit_rate",
    "aggregate_expectation",
    "REL_TOL",
]

REL_TOL = 1e-10  # relative slack for inequality checks
SQRT2 = np.sqrt(2.0)


@dataclass
class RunRecord:
    """One recorded iteration of a run (CSV row of the harness)."""

    n: int
    gamma: float
    resid: float
    draw_err_sq: float
    wall_ns: int
    dist_sq: float | None = None
    ergodic_gap: float | None = None


@dataclass
class InequalityReport:
    """Outcome of one pathwise inequality evaluation at iteration n."""

    n: int
    lhs: float
    rhs: float

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        return self.slack >= -REL_TOL * (1.0 + abs(self.rhs))


def _require_deterministic(trajectory):
    if not trajectory.deterministic:
        raise ValueError(
            "pathwise inequality checks require an exact-oracle trajectory")
    if trajectory.iterates is None:
        raise ValueError("trajectory was recorded without keep_iterates")
    if trajectory.solver not in ("srfb", "rfb", "srpg"):
        raise ValueError(
            f"checks apply to reflected trajectories, not {trajectory.solver!r}")


def _y(traj, n):
    """Reflected point y_n; y_{-1} is the initial point by convention."""
    if n < 0:
        return traj.iterate(0)
    return 2.0 * traj.iterate(n) - traj.iterate(n - 1)


def check_lemma_main(trajectory, problem, x_ref):
    """Pathwise one-step descent estimate along a deterministic run.

    For each 1 <= n < steps, with gamma ratio q = gamma_n / gamma_{n-1}:

        ||x_{n+1}-x||^2 + (3-q)||x_{n+1}-x_n||^2 + q||x_{n+1}-y_n||^2
          + 2 gamma_n <r_n - Bx, x_{n+1}-x_n>
        <=  ||x_n-x||^2 + 2 gamma_n <r_{n-1} - Bx, x_n-x_{n-1}>
          + 2 gamma_n <r_{n-1}-r_n, x_{n+1}-y_n> + q||x_n-y_n||^2
          + 2 gamma_n <r_n - By_n, x - y_n>

    (the last term vanishes on exact runs, where r_n = B y_n).
    """
    _require_deterministic(trajectory)
    B = problem.B if hasattr(problem, "B") else problem.grad
    x = np.asarray(x_ref, dtype=float)
    Bx = B(x)
    sched = trajectory.schedule
    reports = []
    for n in range(1, trajectory.steps):
        g = sched.gamma(n)
        q = g / sched.gamma(n - 1)
        xn, xn1, xnm1 = (trajectory.iterate(n), trajectory.iterate(n + 1),
                         trajectory.iterate(n - 1))
        yn = _y(trajectory, n)
        rn, rnm1 = trajectory.draw(n), trajectory.draw(n - 1)
        lhs = (float((xn1 - x) @ (xn1 - x))
               + (3.0 - q) * float((xn1 - xn) @ (xn1 - xn))
               + q * float((xn1 - yn) @ (xn1 - yn))
               + 2.0 * g * float((rn - Bx) @ (xn1 - xn)))
        rhs = (float((xn - x) @ (xn - x))
               + 2.0 * g * float((rnm1 - Bx) @ (xn - xnm1))
               + 2.0 * g * float((rnm1 - rn) @ (xn1 - yn))
               + q * float((xn - yn) @ (xn - yn))
               + 2.0 * g * float((rn - B(yn)) @ (x - yn)))
        reports.append(InequalityReport(n, lhs, rhs))
    return reports


def check_lemma_qes(trajectory, B, mu):
    """Cauchy-Schwarz estimate on the consecutive-draw cross term.

    For each 0 <= n < steps:

        2 <B y_{n-1} - B y_n, x_{n+1} - y_n>
        <= mu (1+sqrt2) ||y_n-x_n||^2 + mu ||x_n-y_{n-1}||^2
           + mu sqrt2 ||y_n-x_{n+1}||^2
    """
    _require_deterministic(trajectory)
    reports = []
    for n in range(trajectory.steps):
        xn, xn1 = trajectory.iterate(n), trajectory.iterate(n + 1)
        yn, ynm1 = _y(trajectory, n), _y(trajectory, n - 1)
        lhs = 2.0 * float((B(ynm1) - B(yn)) @ (xn1 - yn))
        rhs = (mu * (1.0 + SQRT2) * float((yn - xn) @ (yn - xn))
               + mu * float((xn - ynm1) @ (xn - ynm1))
               + mu * SQRT2 * float((yn - xn1) @ (yn - xn1)))
        reports.append(InequalityReport(n, lhs, rhs))
    return reports


def check_t_lower_bound(trajectory, x_ref, schedule, mu):
    """Lower bound on the rate analysis' Lyapunov quantity.

    T_n = ||x_n-x||^2/gamma_n + mu ||x_n-y_{n-1}||^2
          + (1/gamma_{n-1} + mu (1+sqrt2)) ||x_n-x_{n-1}||^2
          + 2 <B y_{n-1} - Bx, x_n-x_{n-1}>
    must dominate ||x_n-x||^2 / (2 gamma_n).  The derivation assumes
    1/(2 gamma_n) >= mu, which the 1/(2 nu (n+1)) schedule guarantees
    past the burn-in index; earlier indices are reported, not asserted.
    """
    _require_deterministic(trajectory)
    problem = trajectory.problem
    B = problem.B if hasattr(problem, "B") else problem.grad
    x = np.asarray(x_ref, dtype=float)
    Bx = B(x)
    reports = []
    for n in range(trajectory.steps + 1):
        g = schedule.gamma(n)
        gm1 = schedule.gamma(n - 1)
        xn = trajectory.iterate(n)
        xnm1 = trajectory.iterate(n - 1)
        ynm1 = _y(trajectory, n - 1)
        alpha = float((B(ynm1) - Bx) @ (xn - xnm1))
        dist = float((xn - x) @ (xn - x))
        tn = (dist / g
              + mu * float((xn - ynm1) @ (xn - ynm1))
              + (1.0 / gm1 + mu * (1.0 + SQRT2)) * float((xn - xnm1) @ (xn - xnm1))
              + 2.0 * alpha)
        reports.append(InequalityReport(n, dist / (2.0 * g), tn))
    return reports


def fit_rate(series, window):
    """Least-squares slope of log(value) against log(n) over a window.

    ``series`` is a pair of arrays (n, value) or an iterable of (n, value)
    tuples; ``window = (n_lo, n_hi)`` selects n_lo <= n <= n_hi.  Values
    must be strictly positive inside the window; offenders are listed in
    the error.  Returns ``(slope, intercept)``.
    """
    if isinstance(series, tuple) and len(series) == 2 and np.ndim(series[0]) == 1:
        n = np.asarray(series[0], dtype=float)
        v = np.asarray(series[1], dtype=float)
    else:
        arr = np.asarray(list(series), dtype=float)
        n, v = arr[:, 0], arr[:, 1]
    lo, hi = window
    mask = (n >= lo) & (n <= hi)
    if mask.sum() < 2:
        raise ValueError(f"window [{lo}, {hi}] selects fewer than two points")
    bad = np.nonzero(mask & ~(v > 0))[0]
    if bad.size:
        raise ValueError(
            f"nonpositive values at indices {bad.tolist()[:20]} inside the window")
    slope, intercept = np.polyfit(np.log(n[mask]), np.log(v[mask]), 1)
    return float(slope), float(intercept)


def aggregate_expectation(trajectories, metric="dist_sq"):
    """Monte Carlo mean and standard error of a metric across seeds.

    All trajectories must share the same recorded iteration grid.
    Returns ``(ns, mean, stderr)`` with stderr = sample std / sqrt(seeds).
    """
    if len(trajectories) < 2:
        raise ValueError("need at least two seeds to aggregate")
    ns = trajectories[0].ns
    cols = []
    for t in trajectories:
        if t.ns.shape != ns.shape or not np.array_equal(t.ns, ns):
            raise ValueError("trajectories have misaligned iteration grids")
        col = getattr(t, metric)
        if col is None:
            raise ValueError(f"metric {metric!r} absent from a trajectory")
        cols.append(col)
    stacked = np.vstack(cols)
    mean = stacked.mean(axis=0)
    stderr = stacked.std(axis=0, ddof=1) / np.sqrt(len(cols))
    return ns.copy(), mean, stderr
