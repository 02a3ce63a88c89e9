"""Step-size sequences and their admissibility conditions.

Four closed-form kinds ship.  With mu the Lipschitz constant of the
single-valued operator, the key margin for the reflected iteration is

    tau = inf_n ( 2/gamma_n - 1/gamma_{n-1} - mu (1 + sqrt(2)) )

with the convention gamma_{-1} = gamma_0 (the condition references
gamma_{n-1} at n = 0 and a constant or nonincreasing schedule makes the
convention conservative).  The strongly monotone rate schedule is
gamma_n = 1/(2 nu (n+1)), valid past the burn-in index n_0, the smallest
integer above 4 mu (1 + sqrt(2)) / nu.
"""

from __future__ import annotations

import math

import numpy as np

from .oracles import AdmissibilityReport, validate_variance

__all__ = [
    "StepSchedule",
    "tau",
    "strongly_monotone_gamma",
    "burn_in_n0",
    "validate_pd_schedule",
    "admissibility_summary",
    "SQRT2",
]

SQRT2 = math.sqrt(2.0)
KINDS = ("constant", "band", "strongly_monotone", "power_decay")


class StepSchedule:
    """Evaluator n -> gamma_n for one of the closed-form kinds.

    kinds
    -----
    constant(gamma)            gamma_n = gamma
    band(c, gamma)             any sequence inside [c*gamma, gamma];
                               evaluates at the upper edge, validates
                               against the worst case over the band
    strongly_monotone(nu)      gamma_n = 1/(2 nu (n+1))
    power_decay(gamma0, p)     gamma_n = gamma0 / (n+1)^p
    """

    def __init__(self, kind, **params):
        if kind not in KINDS:
            raise ValueError(f"unknown schedule kind {kind!r}")
        self.kind = kind
        self.params = params
        if kind == "constant":
            self._gamma0 = float(params["gamma"])
        elif kind == "band":
            c = float(params["c"])
            if not 0 < c <= 1:
                raise ValueError("band fraction c must lie in ]0, 1]")
            self._gamma0 = float(params["gamma"])
        elif kind == "strongly_monotone":
            nu = float(params["nu"])
            if nu <= 0:
                raise ValueError("nu must be positive")
            self._gamma0 = 1.0 / (2.0 * nu)
        else:
            p = float(params["p"])
            if p <= 0:
                raise ValueError("decay exponent p must be positive")
            self._gamma0 = float(params["gamma0"])
        if self._gamma0 <= 0:
            raise ValueError("step sizes must be positive")

    def gamma(self, n):
        """gamma_n; index -1 is allowed and maps to gamma_0."""
        if n < 0:
            return self._gamma0
        if self.kind in ("constant", "band"):
            return self._gamma0
        if self.kind == "strongly_monotone":
            return 1.0 / (2.0 * self.params["nu"] * (n + 1))
        return self._gamma0 / (n + 1) ** self.params["p"]

    def gammas(self, upto):
        """Vector gamma_0..gamma_{upto-1}, bitwise equal to the scalar form."""
        if self.kind in ("constant", "band"):
            return np.full(upto, self._gamma0)
        if self.kind == "strongly_monotone":
            return 1.0 / (2.0 * self.params["nu"] * np.arange(1.0, upto + 1))
        # numpy's vectorised pow differs from scalar pow by an ulp; keep
        # the scalar evaluation canonical so recorded gammas match gamma(n)
        return np.fromiter((self.gamma(n) for n in range(upto)), float,
                           count=upto)

    @property
    def sup_gamma(self):
        return self._gamma0

    def nonincreasing(self):
        return True  # every shipped kind

    def nondecreasing(self):
        return self.kind in ("constant", "band")

    def decay_exponent(self):
        """q with gamma_n ~ n^-q, used in p-series summability tests."""
        if self.kind in ("constant", "band"):
            return 0.0
        if self.kind == "strongly_monotone":
            return 1.0
        return self.params["p"]

    def square_summable_not_summable(self):
        """Whether (gamma_n) lies in l2 \\ l1."""
        q = self.decay_exponent()
        return 0.5 < q <= 1.0

    def __repr__(self):
        ps = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"StepSchedule({self.kind}, {ps})"


def tau(schedule, mu, horizon=100_000):
    """Infimum of 2/gamma_n - 1/gamma_{n-1} - mu (1 + sqrt(2)).

    For the four closed-form kinds the analytic infimum over all n is
    returned (the band kind uses the worst case gamma_n = gamma,
    gamma_{n-1} = c*gamma); ``horizon`` only matters for schedules whose
    closed form is not recognised, where the minimum over n in
    [0, horizon] is reported instead.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    lip = mu * (1.0 + SQRT2)
    g0 = schedule.gamma(0)
    if schedule.kind == "constant":
        return 1.0 / g0 - lip
    if schedule.kind == "band":
        c = schedule.params["c"]
        return 2.0 / g0 - 1.0 / (c * g0) - lip
    if schedule.kind == "strongly_monotone":
        # 2/gamma_n - 1/gamma_{n-1} = 2 nu (n + 2) increases in n; n = 0
        # uses gamma_{-1} = gamma_0
        return 2.0 / g0 - 1.0 / g0 - lip
    if schedule.kind == "power_decay":
        # (2 (n+1)^p - n^p)/gamma0 increases in n; minimum at n = 0
        return 1.0 / g0 - lip
    n = np.arange(horizon + 1)
    g = np.array([schedule.gamma(k) for k in n])
    gprev = np.concatenate(([schedule.gamma(-1)], g[:-1]))
    return float(np.min(2.0 / g - 1.0 / gprev) - lip)


def strongly_monotone_gamma(nu, n):
    """gamma_n = 1/(2 nu (n+1)) for a nu-strongly monotone operator."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 1.0 / (2.0 * nu * (n + 1))


def burn_in_n0(nu, mu):
    """Smallest integer n_0 with n_0 > 4 mu (1 + sqrt(2)) / nu.

    The factor 4 is the general threshold for the strongly monotone rate;
    a companion statement for the proximal-gradient specialisation quotes
    half this constant.  The larger (safe) threshold is used everywhere.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return math.floor(4.0 * mu * (1.0 + SQRT2) / nu) + 1


def validate_pd_schedule(schedule, mu_h, mu_l, norm_K):
    """Admissibility for the primal-dual iteration.

    With mu = 2 max(mu_h, mu_l) + ||K||, the steps must be nonincreasing
    with sup_n gamma_n strictly below 1/(2 mu).  ("Decreasing" admits
    constant sequences: the deterministic instance runs under the same
    condition with gamma_n = gamma.)
    """
    if min(mu_h, mu_l, norm_K) < 0:
        raise ValueError("constants must be nonnegative")
    mu = 2.0 * max(mu_h, mu_l) + norm_K
    if not schedule.nonincreasing():
        return AdmissibilityReport("primal-dual step bound", False,
                                   "steps are not nonincreasing")
    if mu == 0.0:
        return AdmissibilityReport("primal-dual step bound", True,
                                   "mu = 0 imposes no upper bound")
    bound = 1.0 / (2.0 * mu)
    if schedule.sup_gamma < bound:
        return AdmissibilityReport(
            "primal-dual step bound", True,
            f"sup gamma = {schedule.sup_gamma:g} < 1/(2 mu) = {bound:g}")
    return AdmissibilityReport(
        "primal-dual step bound", False,
        f"sup gamma = {schedule.sup_gamma:g} >= 1/(2 mu) = {bound:g}")


def _range_ok(schedule, mu):
    """Steps inside ]0, (sqrt(2)-1)/mu[ (always true when mu = 0)."""
    if mu == 0.0:
        return True, "mu = 0 imposes no range bound"
    hi = (SQRT2 - 1.0) / mu
    if schedule.sup_gamma < hi:
        return True, f"sup gamma = {schedule.sup_gamma:g} < (sqrt2-1)/mu = {hi:g}"
    return False, f"sup gamma = {schedule.sup_gamma:g} >= (sqrt2-1)/mu = {hi:g}"


def admissibility_summary(schedule, mu, variance, nu=0.0,
                          domain_bounded=False):
    """Which convergence regime's conditions the configuration satisfies.

    Returns a dict of named :class:`AdmissibilityReport`s:

    ``weak_convergence``    nondecreasing steps in range, tau > 0, and
                            summable noise variance;
    ``strong_convergence``  nonincreasing steps in range, square-summable
                            but not summable, weighted-summable variance,
                            a uniformly monotone term and bounded domain;
    ``strongly_monotone_rate``  the exact 1/(2 nu (n+1)) schedule with
                            bounded variance on a strongly monotone
                            problem.
    """
    out = {}

    in_range, range_reason = _range_ok(schedule, mu)
    t = tau(schedule, mu)
    sumv = validate_variance(variance, schedule, "sum-finite")
    parts = []
    ok = True
    if not schedule.nondecreasing():
        ok, parts = False, [f"{schedule.kind} steps are not nondecreasing"]
    if not in_range:
        ok = False
        parts.append(range_reason)
    if t <= 0:
        ok = False
        parts.append(f"tau = {t:g} <= 0")
    else:
        parts.append(f"tau = {t:g} > 0")
    if sumv.passed is not True:
        ok = False
        parts.append(f"variance: {sumv.reason}")
    out["weak_convergence"] = AdmissibilityReport(
        "weak_convergence", ok, "; ".join(parts))

    wv = validate_variance(variance, schedule, "weighted-sum-finite")
    parts = []
    ok = True
    if not schedule.nonincreasing():
        ok = False
        parts.append("steps are not nonincreasing")
    if not in_range:
        ok = False
        parts.append(range_reason)
    if not schedule.square_summable_not_summable():
        ok = False
        parts.append("steps are not in l2 minus l1")
    if wv.passed is not True:
        ok = False
        parts.append(f"weighted variance: {wv.reason}")
    if nu <= 0:
        ok = False
        parts.append("no uniformly monotone term")
    if not domain_bounded:
        ok = False
        parts.append("domain bound not declared")
    out["strong_convergence"] = AdmissibilityReport(
        "strong_convergence", ok, "; ".join(parts) or "all conditions hold")

    bounded = validate_variance(variance, schedule, "bounded")
    parts = []
    ok = True
    if schedule.kind != "strongly_monotone":
        ok = False
        parts.append("schedule is not the 1/(2 nu (n+1)) form")
    elif nu <= 0:
        ok = False
        parts.append("problem declares no strong monotonicity")
    elif abs(schedule.params["nu"] - nu) > 1e-12 * max(1.0, nu):
        ok = False
        parts.append(
            f"schedule nu = {schedule.params['nu']:g} != problem nu = {nu:g}")
    if bounded.passed is not True:
        ok = False
        parts.append(f"variance: {bounded.reason}")
    if ok:
        parts.append(f"burn-in n0 = {burn_in_n0(nu, mu)}")
    out["strongly_monotone_rate"] = AdmissibilityReport(
        "strongly_monotone_rate", ok, "; ".join(parts))

    return out
