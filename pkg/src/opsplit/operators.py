"""Monotone operators, resolvents, proximity operators and linear maps.

Everything acts on finite-dimensional real vectors (1-d float ndarrays).
Set-valued maximal monotone operators are exposed only through their
resolvents ``J_{gamma A} = (Id + gamma A)^{-1}``; single-valued monotone
Lipschitz maps are plain callables with a declared Lipschitz constant.
A small catalog of concrete instances (affine maps, normal cones of boxes
and balls, the l1 norm, squared l2, the probability-simplex indicator)
covers the shipped benchmark problems.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "LipschitzMonotoneMap",
    "ResolvableOperator",
    "ProxFunction",
    "LinearMap",
    "PowerIterationError",
    "apply_map",
    "resolvent",
    "prox_conjugate",
    "estimate_operator_norm",
    "zero_map",
    "identity_map",
    "affine_map",
    "scaled_identity",
    "affine_resolvable",
    "box_normal_cone",
    "ball_normal_cone",
    "l1_norm",
    "squared_l2",
    "simplex_indicator",
    "box_indicator",
    "dense_linear_map",
    "project_simplex",
    "soft_threshold",
]

FEASIBILITY_TOL = 1e-9


class NonFiniteError(ValueError):
    """A vector violated the all-coordinates-finite boundary contract."""


def as_vector(x, dim=None, name="x"):
    """Coerce to a finite 1-d float array, checking dimension when given."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"{name} contains non-finite coordinates")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    return v


def _check_gamma(gamma):
    if not np.isfinite(gamma) or gamma <= 0:
        raise ValueError(f"step gamma must be positive, got {gamma}")
    return float(gamma)


class LipschitzMonotoneMap:
    """A single-valued monotone map with a declared Lipschitz constant.

    Parameters
    ----------
    fn : callable
        Evaluation ``x -> fn(x)``, deterministic.
    mu : float
        Lipschitz constant of ``fn`` (>= 0).
    nu_b : float, optional
        Strong-monotonicity modulus (0 for merely monotone maps).
    dim : int, optional
        Ambient dimension, checked at every evaluation when given.
    linear_matrix, offset : ndarray, optional
        Set when the map is affine ``x -> M x + b``; lets the fast kernels
        recognise it.
    """

    def __init__(self, fn, mu, nu_b=0.0, dim=None, name="map",
                 linear_matrix=None, offset=None):
        if mu < 0:
            raise ValueError("Lipschitz constant mu must be nonnegative")
        if nu_b < 0:
            raise ValueError("strong-monotonicity modulus must be nonnegative")
        self._fn = fn
        self.mu = float(mu)
        self.nu_b = float(nu_b)
        self.dim = dim
        self.name = name
        self.linear_matrix = linear_matrix
        self.offset = offset

    def __call__(self, x):
        x = as_vector(x, self.dim, "x")
        return np.asarray(self._fn(x), dtype=float)

    def __repr__(self):
        return f"LipschitzMonotoneMap({self.name}, mu={self.mu}, nu_b={self.nu_b})"


class ResolvableOperator:
    """A maximal monotone operator accessed through its resolvent.

    ``resolve(gamma, z)`` returns ``J_{gamma A}(z)``; the resolvent of a
    maximal monotone operator is firmly nonexpansive for every gamma > 0.
    """

    def __init__(self, resolvent_fn, nu_a=0.0, domain_bound=None, dim=None,
                 name="operator", scaled_identity_nu=None):
        if nu_a < 0:
            raise ValueError("strong-monotonicity modulus must be nonnegative")
        self._resolvent = resolvent_fn
        self.nu_a = float(nu_a)
        self.domain_bound = domain_bound
        self.dim = dim
        self.name = name
        # set when A = nu * Id, so fast kernels can use the closed form
        self.scaled_identity_nu = scaled_identity_nu

    def resolve(self, gamma, z):
        gamma = _check_gamma(gamma)
        z = as_vector(z, self.dim, "z")
        return np.asarray(self._resolvent(gamma, z), dtype=float)

    def __repr__(self):
        return f"ResolvableOperator({self.name}, nu_a={self.nu_a})"


class ProxFunction:
    """A proper convex function carrying its value and proximity operator.

    ``prox(gamma, x)`` minimises ``f(y) + ||y - x||^2 / (2 gamma)``;
    values may be ``+inf`` outside the effective domain.
    """

    def __init__(self, value_fn, prox_fn, strong_convexity=0.0, dim=None,
                 name="function"):
        self._value = value_fn
        self._prox = prox_fn
        self.strong_convexity = float(strong_convexity)
        self.dim = dim
        self.name = name

    def value(self, x):
        x = as_vector(x, self.dim, "x")
        return float(self._value(x))

    __call__ = value

    def prox(self, gamma, x):
        gamma = _check_gamma(gamma)
        x = as_vector(x, self.dim, "x")
        return np.asarray(self._prox(gamma, x), dtype=float)

    def as_resolvable(self):
        """View the subdifferential as a resolvable operator (J = prox)."""
        return ResolvableOperator(
            self._prox, nu_a=self.strong_convexity, dim=self.dim,
            name=f"subdiff({self.name})")

    def __repr__(self):
        return f"ProxFunction({self.name})"


class LinearMap:
    """A bounded linear map with its adjoint, optionally a known norm."""

    def __init__(self, matrix, norm_hint=None, name="K"):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise ValueError("LinearMap expects a 2-d matrix")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("LinearMap matrix contains non-finite entries")
        self.norm_hint = norm_hint
        self.name = name

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        x = as_vector(x, self.matrix.shape[1], "x")
        return self.matrix @ x

    def adjoint(self, v):
        v = as_vector(v, self.matrix.shape[0], "v")
        return self.matrix.T @ v

    def __repr__(self):
        return f"LinearMap({self.name}, shape={self.matrix.shape})"


# ---------------------------------------------------------------------------
# spec operations


def apply_map(B, x):
    """Evaluate a Lipschitz monotone map at x."""
    return B(x)


def resolvent(A, gamma, z):
    """Evaluate the resolvent J_{gamma A} at z (gamma > 0)."""
    return A.resolve(gamma, z)


def prox_conjugate(f, gamma, z):
    """Proximity operator of the conjugate, via the Moreau decomposition.

    Only the prox of ``f`` itself is needed:

        prox_{gamma f*}(z) = z - gamma * prox_{f / gamma}(z / gamma)

    and ``prox_{f/gamma}(w)`` is ``f``'s prox with step ``1/gamma``.
    """
    gamma = _check_gamma(gamma)
    z = as_vector(z, f.dim, "z")
    return z - gamma * f.prox(1.0 / gamma, z / gamma)


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge; carries the best estimate seen."""

    def __init__(self, message, best_estimate):
        super().__init__(message)
        self.best_estimate = best_estimate


def estimate_operator_norm(K, tol=1e-10, max_iter=10_000):
    """Spectral norm of a linear map by power iteration on K*K.

    Returns ``K.norm_hint`` unchanged when one is declared.  Raises
    :class:`PowerIterationError` (carrying the best estimate) if the
    relative change has not fallen below ``tol`` within ``max_iter``
    sweeps.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter >= 1")
    if K.norm_hint is not None:
        return float(K.norm_hint)
    n = K.matrix.shape[1]
    v = np.ones(n) / np.sqrt(n)
    est = 0.0
    for _ in range(max_iter):
        w = K.adjoint(K.apply(v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v in the null space of K*K; restart from basis vectors
            for i in range(n):
                e = np.zeros(n)
                e[i] = 1.0
                if np.linalg.norm(K.apply(e)) > 0:
                    v = e
                    break
            else:
                return 0.0  # the zero map
            continue
        new_est = np.sqrt(nw)  # sqrt of Rayleigh quotient of K*K
        v = w / nw
        if abs(new_est - est) <= tol * max(new_est, 1e-300):
            return float(new_est)
        est = new_est
    raise PowerIterationError(
        f"power iteration did not converge in {max_iter} sweeps", est)


# ---------------------------------------------------------------------------
# shipped catalog


def zero_map(dim=None):
    return LipschitzMonotoneMap(np.zeros_like, mu=0.0, nu_b=0.0, dim=dim,
                                name="zero")


def identity_map(dim=None):
    return LipschitzMonotoneMap(lambda x: x.copy(), mu=1.0, nu_b=1.0,
                                dim=dim, name="identity")


def affine_map(skew=None, psd=None, offset=None, dim=None, norm_tol=1e-12):
    """Affine monotone map ``x -> (S + P) x + b``.

    ``S`` must be skew-symmetric and ``P`` symmetric positive semidefinite
    (both optional); monotonicity then holds with modulus ``lambda_min(P)``
    and the Lipschitz constant is the spectral norm of ``S + P``.
    """
    mats = [np.asarray(m, dtype=float) for m in (skew, psd) if m is not None]
    if not mats and dim is None:
        raise ValueError("need at least one matrix or an explicit dim")
    d = dim if dim is not None else mats[0].shape[0]
    S = np.zeros((d, d)) if skew is None else np.asarray(skew, dtype=float)
    P = np.zeros((d, d)) if psd is None else np.asarray(psd, dtype=float)
    if not np.allclose(S, -S.T, atol=1e-10):
        raise ValueError("skew part is not skew-symmetric")
    if not np.allclose(P, P.T, atol=1e-10):
        raise ValueError("psd part is not symmetric")
    eigmin = float(np.linalg.eigvalsh((P + P.T) / 2).min()) if psd is not None else 0.0
    if eigmin < -1e-10:
        raise ValueError("psd part has negative eigenvalues")
    M = S + P
    b = np.zeros(d) if offset is None else as_vector(offset, d, "offset")
    mu = estimate_operator_norm(LinearMap(M), tol=norm_tol)
    return LipschitzMonotoneMap(
        lambda x: M @ x + b, mu=mu, nu_b=max(eigmin, 0.0), dim=d,
        name="affine", linear_matrix=M, offset=b)


def scaled_identity(nu, dim=None):
    """A = nu * Id, nu-strongly monotone, with resolvent z / (1 + gamma nu)."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    return ResolvableOperator(
        lambda gamma, z: z / (1.0 + gamma * nu), nu_a=nu, dim=dim,
        name=f"{nu}*Id", scaled_identity_nu=float(nu))


def affine_resolvable(matrix, offset=None, dim=None):
    """A x = M x + b with monotone M; resolvent solves (I + gamma M) y = z - gamma b."""
    M = np.asarray(matrix, dtype=float)
    d = M.shape[0]
    sym = (M + M.T) / 2
    eigmin = float(np.linalg.eigvalsh(sym).min())
    if eigmin < -1e-10:
        raise ValueError("matrix is not monotone (symmetric part indefinite)")
    b = np.zeros(d) if offset is None else as_vector(offset, d, "offset")
    eye = np.eye(d)

    def res(gamma, z):
        return np.linalg.solve(eye + gamma * M, z - gamma * b)

    return ResolvableOperator(res, nu_a=max(eigmin, 0.0), dim=dim or d,
                              name="affine A")


def box_normal_cone(lo, hi):
    """Normal cone of the box [lo, hi]; resolvent is the clip projection."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if np.any(lo > hi):
        raise ValueError("box is empty (lo > hi)")
    bound = float(np.sqrt(np.sum(np.maximum(lo**2, hi**2))))
    return ResolvableOperator(
        lambda gamma, z: np.clip(z, lo, hi), nu_a=0.0,
        domain_bound=bound, dim=lo.shape[0], name="box normal cone")


def ball_normal_cone(radius, center=None, dim=None):
    """Normal cone of a Euclidean ball; resolvent is the radial projection."""
    if radius <= 0:
        raise ValueError("radius must be positive")

    def res(gamma, z):
        c = np.zeros_like(z) if center is None else as_vector(center, z.shape[0])
        delta = z - c
        nrm = np.linalg.norm(delta)
        if nrm <= radius:
            return z.copy()
        return c + delta * (radius / nrm)

    cnorm = 0.0 if center is None else float(np.linalg.norm(center))
    return ResolvableOperator(res, nu_a=0.0, domain_bound=cnorm + radius,
                              dim=dim, name="ball normal cone")


def soft_threshold(z, t):
    """Componentwise shrinkage sign(z) * max(|z| - t, 0)."""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def l1_norm(weight=1.0, dim=None):
    """f(x) = weight * ||x||_1 with the soft-threshold prox."""
    if weight <= 0:
        raise ValueError("weight must be positive")
    return ProxFunction(
        lambda x: weight * float(np.abs(x).sum()),
        lambda gamma, x: soft_threshold(x, gamma * weight),
        dim=dim, name=f"{weight}*l1")


def squared_l2(weight=1.0, dim=None):
    """f(x) = (weight/2) ||x||^2; prox is a pure rescaling."""
    if weight <= 0:
        raise ValueError("weight must be positive")
    return ProxFunction(
        lambda x: 0.5 * weight * float(x @ x),
        lambda gamma, x: x / (1.0 + gamma * weight),
        strong_convexity=weight, dim=dim, name=f"{weight}*sq_l2")


def project_simplex(u):
    """Euclidean projection onto the probability simplex.

    Sort-based algorithm; ties among equal coordinates are scanned in
    index order (stable sort), and the clipped form of the output makes
    the result independent of how ties were broken.
    """
    u = np.asarray(u, dtype=float)
    # stable sort on negated values = descending, index order within ties
    srt = u[np.argsort(-u, kind="stable")]
    css = np.cumsum(srt) - 1.0
    idx = np.arange(1, u.shape[0] + 1)
    rho = np.nonzero(srt - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(u - theta, 0.0)


def _simplex_value(x):
    if np.all(x >= -FEASIBILITY_TOL) and abs(x.sum() - 1.0) <= FEASIBILITY_TOL:
        return 0.0
    return np.inf


def simplex_indicator(dim=None):
    """Indicator of the probability simplex; prox is the projection."""
    return ProxFunction(_simplex_value, lambda gamma, x: project_simplex(x),
                        dim=dim, name="simplex indicator")


def box_indicator(lo, hi):
    """Indicator of the box [lo, hi]; prox is the clip projection."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if np.any(lo > hi):
        raise ValueError("box is empty (lo > hi)")

    def val(x):
        if np.all(x >= lo - FEASIBILITY_TOL) and np.all(x <= hi + FEASIBILITY_TOL):
            return 0.0
        return np.inf

    return ProxFunction(val, lambda gamma, x: np.clip(x, lo, hi),
                        dim=lo.shape[0], name="box indicator")


def dense_linear_map(matrix, norm_hint=None):
    return LinearMap(matrix, norm_hint=norm_hint)
