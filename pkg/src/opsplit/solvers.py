"""Iteration engines for the reflected splitting methods.

Step functions are pure: they take a state and return the next one.

* ``srfb_step``  reflected step with a stochastic oracle:
                 y_n = 2 x_n - x_{n-1},  x_{n+1} = J_{gamma A}(x_n - gamma r_n)
                 with E[r_n | past] = B(y_n);
* ``rfb_step``   the deterministic reflected baseline (B evaluated at y_n),
                 bitwise identical to ``srfb_step`` with an exact oracle;
* ``frb_step``   the forward-reflected baseline
                 x_{n+1} = J_{gamma A}(x_n - 2 gamma B x_n + gamma B x_{n-1});
* ``spd_step``   the primal-dual variant on saddle problems, with reflected
                 points in both blocks and one shared step size;
* ``srpg_step``  proximal-gradient specialisation (A = subdifferential of f).

``run`` drives a full experiment: it validates schedule admissibility
(refusing by default, ``force=True`` to explore failure modes), routes
affine inclusion runs through the compiled kernels when possible, and
records per-iteration metrics into a :class:`Trajectory`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .oracles import (
    StochasticOracle,
    VarianceSchedule,
    ZERO_VARIANCE,
    make_oracle,
    validate_variance,
)
from .operators import NonFiniteError, as_vector
from .problems import CompositeProblem, InclusionProblem, SaddleProblem, duality_gap
from .schedules import admissibility_summary, validate_pd_schedule

__all__ = [
    "SolverState",
    "PrimalDualState",
    "Trajectory",
    "InadmissibleScheduleError",
    "reflect",
    "srfb_step",
    "rfb_step",
    "frb_step",
    "srpg_step",
    "spd_step",
    "ergodic_average",
    "run",
    "SOLVER_KINDS",
]

SOLVER_KINDS = ("srfb", "rfb", "frb", "srpg", "spd")

STOP_STREAK = 10  # consecutive small residuals required by the stop rule


class InadmissibleScheduleError(ValueError):
    """The configuration satisfies none of the convergence conditions."""


@dataclass
class SolverState:
    """Rolling iterate pair (x_n, x_{n-1}) plus the most recent draw."""

    x_curr: np.ndarray
    x_prev: np.ndarray
    n: int = 0
    last_draw: np.ndarray | None = None

    def __post_init__(self):
        if self.x_curr.shape != self.x_prev.shape:
            raise ValueError("x_curr and x_prev dimensions differ")
        if self.last_draw is not None and self.last_draw.shape != self.x_curr.shape:
            raise ValueError("last_draw dimension differs from the iterates")


@dataclass
class PrimalDualState:
    """Primal and dual iterate pairs plus running ergodic accumulators."""

    primal: SolverState
    dual: SolverState
    ergodic_x: np.ndarray = None
    ergodic_v: np.ndarray = None
    weight_total: float = 0.0

    def __post_init__(self):
        if self.ergodic_x is None:
            self.ergodic_x = np.zeros_like(self.primal.x_curr)
        if self.ergodic_v is None:
            self.ergodic_v = np.zeros_like(self.dual.x_curr)


def reflect(x_curr, x_prev):
    """The reflected point y = 2 x_curr - x_prev."""
    x_curr = as_vector(x_curr, name="x_curr")
    x_prev = as_vector(x_prev, x_curr.shape[0], "x_prev")
    return 2.0 * x_curr - x_prev


def srfb_step(state, A, oracle, gamma):
    """One stochastic reflected step; the oracle is sampled at y_n."""
    y = reflect(state.x_curr, state.x_prev)
    r = oracle.draw(state.n, y)
    x_new = A.resolve(gamma, state.x_curr - gamma * r)
    return SolverState(x_new, state.x_curr, state.n + 1, r)


def rfb_step(state, A, B, gamma):
    """Deterministic reflected step; equals srfb_step with an exact oracle."""
    return srfb_step(state, A, StochasticOracle(B, noise="exact"), gamma)


def frb_step(state, A, B, gamma):
    """Forward-reflected step: the field is extrapolated, not the point."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    r = 2.0 * B(state.x_curr) - B(state.x_prev)
    x_new = A.resolve(gamma, state.x_curr - gamma * r)
    return SolverState(x_new, state.x_curr, state.n + 1, r)


def srpg_step(state, f, grad_oracle, gamma):
    """Stochastic reflected proximal gradient: A = subdifferential of f."""
    return srfb_step(state, f.as_resolvable(), grad_oracle, gamma)


def spd_step(state, f, gstar, K, h_oracle, l_oracle, gamma):
    """One primal-dual step with a single shared step size.

    Both blocks use their own reflected point; the coupling terms use the
    dual reflection u_n in the primal update and the primal reflection
    y_n in the dual update, exactly as the saddle-point recursion is
    stated.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    p, d = state.primal, state.dual
    y = reflect(p.x_curr, p.x_prev)
    u = reflect(d.x_curr, d.x_prev)
    rH = h_oracle.draw(p.n, y)
    rL = l_oracle.draw(d.n, u)
    x_new = f.prox(gamma, p.x_curr - gamma * rH - gamma * K.adjoint(u))
    v_new = gstar.prox(gamma, d.x_curr - gamma * rL + gamma * K.apply(y))
    return PrimalDualState(
        primal=SolverState(x_new, p.x_curr, p.n + 1, rH),
        dual=SolverState(v_new, d.x_curr, d.n + 1, rL),
        ergodic_x=state.ergodic_x + gamma * x_new,
        ergodic_v=state.ergodic_v + gamma * v_new,
        weight_total=state.weight_total + gamma)


def ergodic_average(state):
    """Step-weighted averages of the post-step iterates."""
    if state.weight_total <= 0.0:
        raise ValueError("no steps taken: ergodic average undefined")
    return (state.ergodic_x / state.weight_total,
            state.ergodic_v / state.weight_total)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Recorded metrics of one run, plus optional full iterate history."""

    solver: str
    seed: int
    ns: np.ndarray
    gammas: np.ndarray
    resid: np.ndarray
    draw_err_sq: np.ndarray
    wall_ns: np.ndarray
    dist_sq: np.ndarray | None = None
    ergodic_gap: np.ndarray | None = None
    steps: int = 0
    stopped_early: bool = False
    diverged: bool = False
    backend: str = "python"
    noise: str = "exact"
    problem: object = None
    schedule: object = None
    final_x: np.ndarray | None = None
    final_v: np.ndarray | None = None
    iterates: np.ndarray | None = None   # rows: x_{-1}, x_0, ..., x_steps
    draws: np.ndarray | None = None      # rows: r_{-1}, r_0, ..., r_{steps-1}

    @property
    def deterministic(self):
        return self.noise == "exact"

    def iterate(self, n):
        """x_n from the stored history (n >= -1)."""
        if self.iterates is None:
            raise ValueError("run was recorded without keep_iterates")
        return self.iterates[n + 1]

    def draw(self, n):
        """r_n from the stored history (n >= -1)."""
        if self.draws is None:
            raise ValueError("run was recorded without keep_iterates")
        return self.draws[n + 1]

    def records(self):
        """The recorded rows as :class:`~opsplit.diagnostics.RunRecord`s."""
        from .diagnostics import RunRecord
        for i in range(self.ns.shape[0]):
            yield RunRecord(
                n=int(self.ns[i]), gamma=float(self.gammas[i]),
                resid=float(self.resid[i]),
                draw_err_sq=float(self.draw_err_sq[i]),
                wall_ns=int(self.wall_ns[i]),
                dist_sq=None if self.dist_sq is None else float(self.dist_sq[i]),
                ergodic_gap=(None if self.ergodic_gap is None
                             else float(self.ergodic_gap[i])))


def _check_admissibility(problem, solver, schedule, noise_spec, force):
    variance = ZERO_VARIANCE
    if noise_spec.get("noise") == "gaussian" and "variance" in noise_spec:
        v = noise_spec["variance"]
        variance = VarianceSchedule(v["kind"], v["c"], v.get("p"))
    if solver == "spd":
        reports = {
            "primal_dual_step": validate_pd_schedule(
                schedule, problem.mu_h, problem.mu_l, problem.norm_K()),
            "weighted_variance": validate_variance(
                variance, schedule, "weighted-sum-finite"),
        }
        ok = all(r.passed for r in reports.values())
    else:
        incl = problem.as_inclusion() if isinstance(problem, CompositeProblem) else problem
        reports = admissibility_summary(
            schedule, incl.mu, variance, nu=max(incl.nu, incl.A.nu_a),
            domain_bounded=incl.A.domain_bound is not None)
        ok = any(r.passed for r in reports.values())
    if not ok and not force:
        failed = "; ".join(f"{name}: {r.reason}" for name, r in reports.items()
                           if r.passed is not True)
        raise InadmissibleScheduleError(
            f"schedule fails every admissibility condition ({failed}); "
            "pass force=True to run anyway")
    return reports


def _kernel_eligible(problem, solver, noise_spec, keep_iterates):
    if keep_iterates or solver not in ("srfb", "rfb", "frb"):
        return False
    if not isinstance(problem, InclusionProblem):
        return False
    if problem.A.scaled_identity_nu is None:
        return False
    if problem.B.linear_matrix is None or problem.B.offset is None:
        return False
    return noise_spec.get("noise", "exact") in ("exact", "gaussian")


def run(problem, solver, schedule, budget, noise=None, record_every=1,
        stop_tol=0.0, seed=0, x0=None, x_prev=None, v0=None, v_prev=None,
        force=False, keep_iterates=False, backend="auto"):
    """Execute a solver on a problem and record per-iteration metrics.

    Metrics for the iterate produced by step k are recorded under
    n = k+1 together with the step gamma_k that produced it; rows are
    written every ``record_every`` steps.  The run stops at ``budget``
    steps, or earlier when the residual ||x_n - x_{n-1}|| stays below
    ``stop_tol`` for ten consecutive iterations, or when an iterate
    stops being finite (recorded as ``diverged``).

    Admissibility of the (schedule, noise) pair is checked first and the
    run is refused when no convergence condition holds, unless ``force``.
    """
    if solver not in SOLVER_KINDS:
        raise ValueError(f"unknown solver {solver!r}")
    if budget < 0 or record_every < 1:
        raise ValueError("budget must be >= 0 and record_every >= 1")
    noise_spec = dict(noise) if noise else {"noise": "exact"}
    if solver == "spd":
        if not isinstance(problem, SaddleProblem):
            raise ValueError("spd requires a saddle problem")
    else:
        if isinstance(problem, SaddleProblem):
            raise ValueError(f"{solver} requires an inclusion or composite problem")
        if solver == "srpg" and not isinstance(problem, CompositeProblem):
            raise ValueError("srpg requires a composite problem")
        if solver in ("rfb", "frb") and noise_spec.get("noise", "exact") != "exact":
            raise ValueError(f"{solver} is a deterministic baseline; use srfb for noise")
    _check_admissibility(problem, solver, schedule, noise_spec, force)
    if solver == "spd":
        return _run_spd(problem, schedule, budget, noise_spec, record_every,
                        stop_tol, seed, x0, x_prev, v0, v_prev)
    incl = problem.as_inclusion() if isinstance(problem, CompositeProblem) else problem
    x0 = incl.default_start() if x0 is None else as_vector(x0, incl.dim, "x0")
    x_prev = x0.copy() if x_prev is None else as_vector(x_prev, incl.dim, "x_prev")
    gammas = schedule.gammas(budget) if budget else np.empty(0)
    if _kernel_eligible(incl, solver, noise_spec, keep_iterates):
        return _run_kernel(incl, solver, schedule, gammas, noise_spec,
                           record_every, stop_tol, seed, x0, x_prev, backend)
    return _run_inclusion(incl, problem, solver, schedule, gammas, noise_spec,
                          record_every, stop_tol, seed, x0, x_prev,
                          keep_iterates)


def _noise_std_array(noise_spec, budget):
    if noise_spec.get("noise") != "gaussian":
        return None
    v = noise_spec["variance"]
    from .oracles import VarianceSchedule
    sched = VarianceSchedule(v["kind"], v["c"], v.get("p"))
    return np.sqrt(sched.variances(budget))


def _run_kernel(problem, solver, schedule, gammas, noise_spec, record_every,
                stop_tol, seed, x0, x_prev, backend):
    noise_std = None
    if solver == "srfb":
        noise_std = _noise_std_array(noise_spec, gammas.shape[0])
    out = kernels.affine_loop(
        problem.B.linear_matrix, problem.B.offset,
        problem.A.scaled_identity_nu, x0, x_prev, problem.known_zero,
        gammas, noise_std=noise_std, seed=seed, frb=(solver == "frb"),
        record_every=record_every, stop_tol=stop_tol, backend=backend)
    ns = out["ns"]
    return Trajectory(
        solver=solver, seed=seed, ns=ns,
        gammas=gammas[ns - 1] if ns.size else np.empty(0),
        resid=out["resid"], draw_err_sq=out["draw_err_sq"],
        wall_ns=out["wall_ns"], dist_sq=out["dist_sq"],
        steps=out["steps"], stopped_early=out["stopped_early"],
        diverged=out["diverged"], backend=out["backend"],
        noise=noise_spec.get("noise", "exact"), problem=problem,
        schedule=schedule, final_x=out["x"])


def _build_oracle(problem, noise_spec, seed):
    spec = dict(noise_spec)
    if spec.get("noise") == "minibatch":
        if not isinstance(problem, CompositeProblem) and not getattr(
                problem, "components", None):
            raise ValueError("minibatch noise needs a finite-sum problem")
        spec["components"] = problem.components
        base = problem.grad
    elif isinstance(problem, CompositeProblem):
        base = problem.grad
    else:
        base = problem.B
    return make_oracle(base, spec, seed=seed)


def _run_inclusion(problem, oracle_src, solver, schedule, gammas, noise_spec,
                   record_every, stop_tol, seed, x0, x_prev, keep_iterates):
    budget = gammas.shape[0]
    A = problem.A
    B = problem.B
    oracle = _build_oracle(oracle_src, noise_spec, seed)
    xbar = problem.known_zero
    cap = max(1, -(-budget // record_every)) if budget else 0
    ns = np.empty(cap, dtype=np.int64)
    dist = np.empty(cap)
    resid = np.empty(cap)
    draw_err = np.empty(cap)
    wall = np.empty(cap, dtype=np.int64)
    hist_x = [x_prev.copy(), x0.copy()] if keep_iterates else None
    hist_r = [oracle.draw(-1, x0)] if keep_iterates else None
    state = SolverState(x0, x_prev, 0, None)
    t0 = time.perf_counter_ns()
    rows = 0
    streak = 0
    stopped = False
    diverged = False
    steps = 0
    # overflow past a divergence point is expected and detected below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(budget):
            g = gammas[k]
            try:
                if solver == "frb":
                    new = frb_step(state, A, B, g)
                    d_err = 0.0
                else:
                    y = reflect(state.x_curr, state.x_prev)
                    new = srfb_step(state, A, oracle, g)
                    delta = new.last_draw - B(y)
                    d_err = float(delta @ delta)
            except NonFiniteError:
                diverged = True
                break
            dvec = new.x_curr - state.x_curr
            res = math.sqrt(float(dvec @ dvec))
            if xbar is not None:
                evec = new.x_curr - xbar
                dsq = float(evec @ evec)
            else:
                dsq = math.nan
            if not math.isfinite(res) or (xbar is not None and not math.isfinite(dsq)):
                diverged = True
                break
            state = new
            steps = k + 1
            if keep_iterates:
                hist_x.append(state.x_curr.copy())
                hist_r.append(state.last_draw.copy())
            if stop_tol > 0.0:
                streak = streak + 1 if res < stop_tol else 0
            if k % record_every == 0:
                ns[rows] = k + 1
                dist[rows] = dsq
                resid[rows] = res
                draw_err[rows] = d_err
                wall[rows] = time.perf_counter_ns() - t0
                rows += 1
            if streak >= STOP_STREAK:
                stopped = True
                break
    ns = ns[:rows]
    return Trajectory(
        solver=solver, seed=seed, ns=ns,
        gammas=gammas[ns - 1] if ns.size else np.empty(0),
        resid=resid[:rows], draw_err_sq=draw_err[:rows], wall_ns=wall[:rows],
        dist_sq=dist[:rows] if xbar is not None else None,
        steps=steps, stopped_early=stopped, diverged=diverged,
        backend="object", noise=noise_spec.get("noise", "exact"),
        problem=problem, schedule=schedule,
        final_x=state.x_curr,
        iterates=np.array(hist_x) if keep_iterates else None,
        draws=np.array(hist_r) if keep_iterates else None)


def _run_spd(problem, schedule, budget, noise_spec, record_every, stop_tol,
             seed, x0, x_prev, v0, v_prev):
    dx, dv = problem.default_start()
    x0 = dx if x0 is None else as_vector(x0, problem.dim_primal, "x0")
    v0 = dv if v0 is None else as_vector(v0, problem.dim_dual, "v0")
    x_prev = x0.copy() if x_prev is None else as_vector(x_prev, problem.dim_primal)
    v_prev = v0.copy() if v_prev is None else as_vector(v_prev, problem.dim_dual)
    seeds = np.random.SeedSequence(seed).spawn(2)
    h_oracle = make_oracle(problem.h_grad, noise_spec, seed=seeds[0])
    l_oracle = make_oracle(problem.l_grad, noise_spec, seed=seeds[1])
    gammas = schedule.gammas(budget) if budget else np.empty(0)
    cap = max(1, -(-budget // record_every)) if budget else 0
    ns = np.empty(cap, dtype=np.int64)
    dist = np.empty(cap)
    resid = np.empty(cap)
    draw_err = np.empty(cap)
    gap = np.empty(cap)
    wall = np.empty(cap, dtype=np.int64)
    state = PrimalDualState(SolverState(x0, x_prev), SolverState(v0, v_prev))
    saddle = problem.known_saddle
    t0 = time.perf_counter_ns()
    rows = 0
    streak = 0
    stopped = False
    diverged = False
    steps = 0
    for k in range(budget):
        g = gammas[k]
        try:
            y = reflect(state.primal.x_curr, state.primal.x_prev)
            u = reflect(state.dual.x_curr, state.dual.x_prev)
            new = spd_step(state, problem.f, problem.gstar, problem.K,
                           h_oracle, l_oracle, g)
            dH = new.primal.last_draw - problem.h_grad(y)
            dL = new.dual.last_draw - problem.l_grad(u)
            d_err = float(dH @ dH) + float(dL @ dL)
        except NonFiniteError:
            diverged = True
            break
        rx = new.primal.x_curr - state.primal.x_curr
        rv = new.dual.x_curr - state.dual.x_curr
        res = math.sqrt(float(rx @ rx) + float(rv @ rv))
        if saddle is not None:
            ex = new.primal.x_curr - saddle[0]
            ev = new.dual.x_curr - saddle[1]
            dsq = float(ex @ ex) + float(ev @ ev)
        else:
            dsq = math.nan
        if not math.isfinite(res):
            diverged = True
            break
        state = new
        steps = k + 1
        if stop_tol > 0.0:
            streak = streak + 1 if res < stop_tol else 0
        if k % record_every == 0:
            xhat, vhat = ergodic_average(state)
            ns[rows] = k + 1
            dist[rows] = dsq
            resid[rows] = res
            draw_err[rows] = d_err
            gap[rows] = duality_gap(problem, xhat, vhat)
            wall[rows] = time.perf_counter_ns() - t0
            rows += 1
        if streak >= STOP_STREAK:
            stopped = True
            break
    ns = ns[:rows]
    return Trajectory(
        solver="spd", seed=seed, ns=ns,
        gammas=gammas[ns - 1] if ns.size else np.empty(0),
        resid=resid[:rows], draw_err_sq=draw_err[:rows], wall_ns=wall[:rows],
        dist_sq=dist[:rows] if saddle is not None else None,
        ergodic_gap=gap[:rows],
        steps=steps, stopped_early=stopped, diverged=diverged,
        backend="object", noise=noise_spec.get("noise", "exact"),
        problem=problem, schedule=schedule,
        final_x=state.primal.x_curr, final_v=state.dual.x_curr)
