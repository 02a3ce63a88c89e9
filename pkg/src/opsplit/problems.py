"""Benchmark problems with independently computed reference solutions.

Three families:

* affine inclusions 0 in (nu*Id + S)x + b with S skew -- the zero is a
  direct linear solve, the operator is monotone and ||S||-Lipschitz but
  not cocoercive;
* l1-regularised least squares (finite-sum smooth part) -- the reference
  minimiser comes from a cyclic coordinate-descent solver written before
  and independently of the splitting iterations;
* two-player zero-sum games over probability simplices, optionally with
  a quadratic smoothing term on the dual -- equilibria come from support
  enumeration (bilinear case) or a projected extragradient fixed-point
  refiner (smoothed case).

The saddle problems carry the gap function
G(x, v) = h(x) + f(x) + <Kx, v> - g*(v) - l(v) and an exact duality-gap
evaluator for the shipped classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .operators import (
    LinearMap,
    LipschitzMonotoneMap,
    ProxFunction,
    ResolvableOperator,
    as_vector,
    estimate_operator_norm,
    l1_norm,
    project_simplex,
    scaled_identity,
    simplex_indicator,
    soft_threshold,
)

__all__ = [
    "InclusionProblem",
    "CompositeProblem",
    "SaddleProblem",
    "GapNotComputableError",
    "make_affine_inclusion",
    "make_lasso",
    "make_matrix_game",
    "make_smoothed_saddle",
    "evaluate_gap",
    "duality_gap",
]


@dataclass
class InclusionProblem:
    """Find x with 0 in A(x) + B(x); A via resolvent, B single-valued."""

    A: ResolvableOperator
    B: LipschitzMonotoneMap
    dim: int
    mu: float
    nu: float = 0.0
    known_zero: np.ndarray | None = None
    name: str = "inclusion"

    def fixed_point_residual(self, gamma=1.0):
        """||xbar - J_{gamma A}(xbar - gamma B xbar)|| at the known zero."""
        if self.known_zero is None:
            raise ValueError("problem has no known zero")
        x = self.known_zero
        return float(np.linalg.norm(x - self.A.resolve(gamma, x - gamma * self.B(x))))

    def default_start(self):
        return np.zeros(self.dim)


@dataclass
class CompositeProblem:
    """minimize f(x) + h(x) with h = mean of smooth components.

    ``grad`` evaluates the full gradient of h; ``components`` hold the
    per-row gradients for minibatch oracles.  ``reference_solution`` is
    produced by the coordinate-descent oracle in :func:`make_lasso`.
    """

    f: ProxFunction
    grad: LipschitzMonotoneMap
    components: list = field(default_factory=list)
    dim: int = 0
    mu_h: float = 0.0
    reference_solution: np.ndarray | None = None
    name: str = "composite"

    def as_inclusion(self):
        """The optimality condition 0 in df(x) + grad h(x) as an inclusion."""
        return InclusionProblem(
            A=self.f.as_resolvable(), B=self.grad, dim=self.dim,
            mu=self.mu_h, nu=self.f.strong_convexity,
            known_zero=self.reference_solution, name=self.name)

    def objective(self, x):
        x = as_vector(x, self.dim)
        return self.f.value(x) + self._h_value(x)

    def _h_value(self, x):
        raise NotImplementedError  # replaced per instance

    def default_start(self):
        return np.zeros(self.dim)


@dataclass
class SaddleProblem:
    """min_x max_v  h(x) + f(x) + <Kx, v> - g*(v) - l(v).

    ``kind`` names the class for which the duality gap has an exact inner
    optimisation: "bilinear_simplex" or "smoothed_simplex".
    """

    f: ProxFunction
    gstar: ProxFunction
    K: LinearMap
    h_grad: LipschitzMonotoneMap
    l_grad: LipschitzMonotoneMap
    mu_h: float
    mu_l: float
    dim_primal: int
    dim_dual: int
    kind: str
    payoff: np.ndarray | None = None
    beta: float = 0.0
    known_saddle: tuple | None = None
    game_value: float | None = None
    name: str = "saddle"

    def h_value(self, x):
        return 0.0  # both shipped classes have h identically zero

    def l_value(self, v):
        if self.kind == "smoothed_simplex":
            return 0.5 * self.beta * float(v @ v)
        return 0.0

    def norm_K(self):
        return estimate_operator_norm(self.K)

    def default_start(self):
        x = np.full(self.dim_primal, 1.0 / self.dim_primal)
        v = np.full(self.dim_dual, 1.0 / self.dim_dual)
        return x, v


class GapNotComputableError(ValueError):
    """The duality gap has no exact inner optimisation for this class."""


# ---------------------------------------------------------------------------
# affine inclusions


def make_affine_inclusion(dim, nu, skew_scale, seed=0):
    """Random affine inclusion with a known zero.

    A = nu*Id (closed-form resolvent) and B x = S x + b with S a random
    skew matrix rescaled to spectral norm ``skew_scale``; the zero is
    xbar = -(nu I + S)^{-1} b by direct solve.  With nu = 0 the field is a
    pure rotation (needs even ``dim``: odd skew matrices are singular).
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if nu < 0 or skew_scale < 0:
        raise ValueError("nu and skew_scale must be nonnegative")
    rng = np.random.default_rng(seed)
    if skew_scale > 0 and dim > 1:
        G = rng.standard_normal((dim, dim))
        S0 = (G - G.T) / 2.0
        S = skew_scale * S0 / np.linalg.norm(S0, 2)
    else:
        S = np.zeros((dim, dim))
    b = rng.standard_normal(dim)
    M = nu * np.eye(dim) + S
    try:
        xbar = -np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            f"singular system: nu = {nu} and the skew part cannot invert b") from exc
    if not np.all(np.isfinite(xbar)):
        raise ValueError("singular system produced a non-finite zero")
    mu = estimate_operator_norm(LinearMap(S)) if skew_scale > 0 else 0.0
    B = LipschitzMonotoneMap(
        lambda x: S @ x + b, mu=mu, nu_b=0.0, dim=dim, name="skew field",
        linear_matrix=S, offset=b)
    return InclusionProblem(
        A=scaled_identity(nu, dim=dim), B=B, dim=dim, mu=mu, nu=nu,
        known_zero=xbar, name=f"affine(d={dim},nu={nu:g},mu={mu:g})")


# ---------------------------------------------------------------------------
# lasso


def _lasso_coordinate_descent(A, b, lam, tol=1e-12, max_sweeps=100_000):
    """High-precision minimiser of lam*||x||_1 + ||Ax - b||^2 / (2 m).

    Cyclic coordinate minimisation, run until the largest coordinate move
    in a full sweep falls below ``tol``.  Kept free of any reflected or
    splitting machinery so it can certify those solvers' output.
    """
    m, d = A.shape
    x = np.zeros(d)
    col_sq = (A * A).sum(axis=0) / m
    r = A @ x - b
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                new = 0.0
            else:
                rho = x[j] * col_sq[j] - (A[:, j] @ r) / m
                new = soft_threshold(np.array([rho]), lam)[0] / col_sq[j]
            step = new - x[j]
            if step != 0.0:
                r += A[:, j] * step
                x[j] = new
                delta = max(delta, abs(step))
        if delta < tol:
            return x
    return x


def make_lasso(design, targets, lam):
    """l1-regularised least squares with a coordinate-descent reference.

    h(x) = mean_i (a_i.x - b_i)^2 / 2, so grad h(x) = A^T (Ax - b)/m and
    mu_h = ||A||^2 / m; f = lam * ||.||_1.  Components are the per-row
    gradients, whose mean is grad h (minibatch oracle contract).
    """
    A = np.atleast_2d(np.asarray(design, dtype=float))
    b = np.atleast_1d(np.asarray(targets, dtype=float))
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if A.shape[0] != b.shape[0]:
        raise ValueError("design rows and targets disagree")
    m, d = A.shape
    gram_norm = float(np.linalg.norm(A, 2)) ** 2 / m

    def grad(x):
        return A.T @ (A @ x - b) / m

    components = [
        LipschitzMonotoneMap(
            (lambda ai, bi: lambda x: ai * (ai @ x - bi))(A[i], b[i]),
            mu=float(A[i] @ A[i]), dim=d, name=f"row {i}")
        for i in range(m)
    ]
    xref = _lasso_coordinate_descent(A, b, lam)
    prob = CompositeProblem(
        f=l1_norm(lam, dim=d),
        grad=LipschitzMonotoneMap(grad, mu=gram_norm, dim=d,
                                  name="least-squares gradient"),
        components=components, dim=d, mu_h=gram_norm,
        reference_solution=xref, name=f"lasso({m}x{d},lam={lam:g})")
    prob._h_value = lambda x: float(((A @ x - b) ** 2).sum()) / (2 * m)
    return prob


# ---------------------------------------------------------------------------
# zero-sum games


def _support_enumeration(M, tol=1e-11):
    """Equilibrium of the zero-sum game min_x max_v x.Mv by support search.

    Enumerates square support pairs, solves the indifference systems and
    keeps the first pair passing feasibility and best-response checks.
    Exact at desk scale; no linear programming involved.
    """
    m, n = M.shape
    for k in range(1, min(m, n) + 1):
        for I in combinations(range(m), k):
            for J in combinations(range(n), k):
                # x on I making the maximiser indifferent over J, v on J
                # making the minimiser indifferent over I
                Asys = np.zeros((k + 1, k + 1))
                Asys[:k, :k] = M[np.ix_(I, J)].T
                Asys[:k, k] = -1.0
                Asys[k, :k] = 1.0
                rhs = np.zeros(k + 1)
                rhs[k] = 1.0
                try:
                    solx = np.linalg.solve(Asys, rhs)
                except np.linalg.LinAlgError:
                    continue
                Bsys = np.zeros((k + 1, k + 1))
                Bsys[:k, :k] = M[np.ix_(I, J)]
                Bsys[:k, k] = -1.0
                Bsys[k, :k] = 1.0
                try:
                    solv = np.linalg.solve(Bsys, rhs)
                except np.linalg.LinAlgError:
                    continue
                xs, wx = solx[:k], solx[k]
                vs, wv = solv[:k], solv[k]
                if np.any(xs < -tol) or np.any(vs < -tol):
                    continue
                if abs(wx - wv) > 1e-8 * (1 + abs(wx)):
                    continue
                x = np.zeros(m)
                x[list(I)] = np.clip(xs, 0.0, None)
                x /= x.sum()
                v = np.zeros(n)
                v[list(J)] = np.clip(vs, 0.0, None)
                v /= v.sum()
                omega = float(x @ M @ v)
                # best-response conditions: no row improves for the
                # minimiser, no column for the maximiser
                if np.any(M @ v < omega - 1e-9):
                    continue
                if np.any(M.T @ x > omega + 1e-9):
                    continue
                return x, v, omega
    raise RuntimeError("support enumeration found no equilibrium")


def _saddle_field(M, beta):
    """Monotone field of the (optionally smoothed) simplex game."""
    def F(z):
        m = M.shape[0]
        x, v = z[:m], z[m:]
        return np.concatenate([M @ v, -(M.T @ x) + beta * v])
    return F


def _extragradient_saddle(M, beta, tol=1e-10, max_iter=2_000_000):
    """Projected extragradient refiner for the smoothed game saddle.

    A two-evaluation scheme, deliberately distinct from the reflected
    one-evaluation iteration it is used to certify.
    """
    m, n = M.shape
    F = _saddle_field(M, beta)
    mu_F = float(np.linalg.norm(M, 2)) + beta
    t = 0.3 / max(mu_F, 1e-12)
    z = np.concatenate([np.full(m, 1.0 / m), np.full(n, 1.0 / n)])

    def proj(w):
        return np.concatenate([project_simplex(w[:m]), project_simplex(w[m:])])

    for _ in range(max_iter):
        zh = proj(z - t * F(z))
        znew = proj(z - t * F(zh))
        done = np.linalg.norm(znew - z) < tol * t
        z = znew
        if done:
            break
    return z[:m], z[m:]


def make_matrix_game(payoff):
    """Zero-sum game min_x max_v x.Mv over probability simplices.

    The gap bilinear term is <Kx, v> with K = M^T.  The equilibrium and
    game value come from :func:`_support_enumeration`.
    """
    M = np.atleast_2d(np.asarray(payoff, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError("payoff must be finite")
    m, n = M.shape
    x, v, omega = _support_enumeration(M)
    return SaddleProblem(
        f=simplex_indicator(dim=m), gstar=simplex_indicator(dim=n),
        K=LinearMap(M.T, name="payoff^T"),
        h_grad=LipschitzMonotoneMap(np.zeros_like, mu=0.0, dim=m, name="zero"),
        l_grad=LipschitzMonotoneMap(np.zeros_like, mu=0.0, dim=n, name="zero"),
        mu_h=0.0, mu_l=0.0, dim_primal=m, dim_dual=n,
        kind="bilinear_simplex", payoff=M, known_saddle=(x, v),
        game_value=omega, name=f"game({m}x{n})")


def make_smoothed_saddle(payoff, beta, saddle_tol=1e-10):
    """Matrix game with an extra (beta/2)||v||^2 penalty on the maximiser.

    The quadratic term enters through l(v) = (beta/2)||v||^2, making the
    problem strongly concave in v (mu_l = beta); the reference saddle is
    refined by projected extragradient to ``saddle_tol``.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    M = np.atleast_2d(np.asarray(payoff, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError("payoff must be finite")
    m, n = M.shape
    xs, vs = _extragradient_saddle(M, beta, tol=saddle_tol)
    return SaddleProblem(
        f=simplex_indicator(dim=m), gstar=simplex_indicator(dim=n),
        K=LinearMap(M.T, name="payoff^T"),
        h_grad=LipschitzMonotoneMap(np.zeros_like, mu=0.0, dim=m, name="zero"),
        l_grad=LipschitzMonotoneMap(lambda v: beta * v, mu=beta, nu_b=beta,
                                    dim=n, name="quadratic"),
        mu_h=0.0, mu_l=beta, dim_primal=m, dim_dual=n,
        kind="smoothed_simplex", payoff=M, beta=beta,
        known_saddle=(xs, vs), name=f"smoothed game({m}x{n},beta={beta:g})")


# ---------------------------------------------------------------------------
# gap functions


def evaluate_gap(problem, x, v):
    """Extended-real value of G(x, v); +inf / -inf absorb domain violations."""
    x = as_vector(x, problem.dim_primal, "x")
    v = as_vector(v, problem.dim_dual, "v")
    if problem.f.value(x) == np.inf:
        return np.inf
    if problem.gstar.value(v) == np.inf:
        return -np.inf
    return (problem.h_value(x) + problem.f.value(x)
            + float(problem.K.apply(x) @ v)
            - problem.gstar.value(v) - problem.l_value(v))


def duality_gap(problem, x, v):
    """sup_v' G(x, v') - inf_x' G(x', v), exactly, for the shipped classes.

    Bilinear over simplices: both inner problems are linear, so the
    optima sit at vertices.  Smoothed: the v' problem is a concave
    quadratic over the simplex, solved in closed form by projecting the
    unconstrained maximiser.  Anything else raises
    :class:`GapNotComputableError` rather than approximating silently.
    """
    x = as_vector(x, problem.dim_primal, "x")
    v = as_vector(v, problem.dim_dual, "v")
    if problem.f.value(x) == np.inf or problem.gstar.value(v) == np.inf:
        raise ValueError("duality gap is defined for feasible (x, v) only")
    Kx = problem.K.apply(x)
    Ktv = problem.K.adjoint(v)
    if problem.kind == "bilinear_simplex":
        return float(np.max(Kx) - np.min(Ktv))
    if problem.kind == "smoothed_simplex":
        beta = problem.beta
        vbest = project_simplex(Kx / beta)
        sup_term = float(Kx @ vbest) - 0.5 * beta * float(vbest @ vbest)
        inf_term = float(np.min(Ktv)) - 0.5 * beta * float(v @ v)
        return sup_term - inf_term
    raise GapNotComputableError(
        f"no exact inner optimisation for problem kind {problem.kind!r}")
