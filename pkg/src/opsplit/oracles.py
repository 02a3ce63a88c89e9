"""Unbiased stochastic oracles for a monotone Lipschitz map.

The map ``B`` itself is always deterministic; randomness enters only
through the oracle, so diagnostics can always evaluate the true ``B(y)``
alongside a draw.  Three noise models ship:

* ``exact``             -- draw(n, y) = B(y), consumes no randomness;
* ``gaussian``          -- B(y) plus isotropic Gaussian noise whose total
                           variance sigma_n^2 follows a per-iteration
                           schedule, split equally across coordinates;
* ``minibatch``         -- mean of a uniformly sampled batch of component
                           maps whose average is B.

Draws are bit-reproducible for a fixed seed and call sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import as_vector

__all__ = [
    "VarianceSchedule",
    "StochasticOracle",
    "AdmissibilityReport",
    "make_oracle",
    "validate_variance",
]

NOISE_KINDS = ("exact", "gaussian", "minibatch")


class VarianceSchedule:
    """Per-iteration noise variance sigma_n^2.

    kinds
    -----
    constant(c)   sigma_n^2 = c
    power(c, p)   sigma_n^2 = c / (n+1)^p
    """

    def __init__(self, kind, c, p=None):
        if kind not in ("constant", "power"):
            raise ValueError(f"unknown variance kind {kind!r}")
        if c < 0:
            raise ValueError("variance scale c must be nonnegative")
        if kind == "power" and (p is None or p <= 0):
            raise ValueError("power schedule needs an exponent p > 0")
        self.kind = kind
        self.c = float(c)
        self.p = None if p is None else float(p)

    def variance(self, n):
        if self.kind == "constant":
            return self.c
        return self.c / (n + 1) ** self.p

    def sigma(self, n):
        return math.sqrt(self.variance(n))

    def variances(self, upto):
        """Vector of sigma_n^2 for n = 0..upto-1 (bitwise matches variance(n))."""
        if self.kind == "constant":
            return np.full(upto, self.c)
        return np.fromiter((self.variance(n) for n in range(upto)), float,
                           count=upto)

    def sum_finite(self):
        """Whether sum_n sigma_n^2 converges (p-series test)."""
        if self.c == 0.0:
            return True
        return self.kind == "power" and self.p > 1

    def __repr__(self):
        if self.kind == "constant":
            return f"VarianceSchedule(constant, c={self.c})"
        return f"VarianceSchedule(power, c={self.c}, p={self.p})"


ZERO_VARIANCE = VarianceSchedule("constant", 0.0)


class StochasticOracle:
    """Unbiased estimator of ``base(y)`` with a private random stream.

    The draw at step n may depend on the past only through the stream
    position, which realises the conditional-unbiasedness contract
    E[draw(n, y) | past] = base(y).
    """

    def __init__(self, base, noise="exact", variance=None, components=None,
                 batch_size=1, seed=0):
        if noise not in NOISE_KINDS:
            raise ValueError(f"unknown noise model {noise!r}")
        self.base = base
        self.noise = noise
        self.variance = variance if variance is not None else ZERO_VARIANCE
        self.components = components
        self.batch_size = int(batch_size)
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        if noise == "minibatch":
            if not components:
                raise ValueError("minibatch oracle needs component maps")
            if self.batch_size < 1:
                raise ValueError("batch size must be >= 1")

    def draw(self, n, y):
        """One estimate r_n of base(y); bit-reproducible per seed.

        ``n = -1`` is the initialisation draw used to seed diagnostics
        that reference the previous draw: it returns the conditional mean
        ``base(y)`` and consumes no randomness, which is a valid
        initial-sigma-field choice and keeps the per-step streams aligned
        between the object loop and the block-noise kernels.
        """
        y = as_vector(y, self.base.dim, "y")
        if self.noise == "exact" or n < 0:
            return self.base(y)
        if self.noise == "gaussian":
            by = self.base(y)
            sig = self.variance.sigma(n)
            if sig == 0.0:
                return by
            scale = sig / math.sqrt(y.shape[0])
            return by + scale * self._rng.standard_normal(y.shape[0])
        # minibatch: uniform with replacement over the component maps
        idx = self._rng.integers(0, len(self.components), size=self.batch_size)
        out = np.zeros_like(y)
        for i in idx:
            out += self.components[i](y)
        return out / self.batch_size

    def __repr__(self):
        return f"StochasticOracle({self.noise}, base={self.base.name!r})"


def make_oracle(base, spec, seed=0):
    """Build an oracle from a plain dict spec (harness plumbing).

    ``spec`` keys: ``noise`` plus, per model, ``variance`` (dict with
    kind/c/p) or ``batch_size``.  Component maps for the minibatch model
    are supplied by the problem, not the spec.
    """
    noise = spec.get("noise", "exact")
    variance = None
    if "variance" in spec:
        v = spec["variance"]
        variance = VarianceSchedule(v["kind"], v["c"], v.get("p"))
    return StochasticOracle(
        base, noise=noise, variance=variance,
        components=spec.get("components"),
        batch_size=spec.get("batch_size", 1), seed=seed)


@dataclass
class AdmissibilityReport:
    """Verdict of one analytic admissibility check.

    ``passed`` is True/False for decided conditions and None when the
    closed forms involved are not recognised (never a silent pass).
    """

    condition: str
    passed: bool | None
    reason: str

    def to_dict(self):
        return {"condition": self.condition, "passed": self.passed,
                "reason": self.reason}


def validate_variance(schedule, step, condition):
    """Analytic summability checks tying noise variance to the step sizes.

    conditions
    ----------
    ``sum-finite``           sum_n sigma_n^2 < inf
    ``weighted-sum-finite``  sum_n gamma_n^2 sigma_n^2 < inf
    ``bounded``              sup_n sigma_n^2 < inf

    All verdicts come from p-series tests on the closed forms; anything
    outside the known kinds yields an undecidable report.
    """
    if condition == "bounded":
        # both shipped kinds are nonincreasing in n
        return AdmissibilityReport(
            "bounded", True,
            f"sup sigma_n^2 = {schedule.variance(0):g} at n = 0")
    if condition == "sum-finite":
        if schedule.c == 0.0:
            return AdmissibilityReport("sum-finite", True, "zero variance")
        if schedule.kind == "constant":
            return AdmissibilityReport(
                "sum-finite", False,
                f"constant variance {schedule.c:g} has a divergent sum")
        if schedule.p > 1:
            return AdmissibilityReport(
                "sum-finite", True, f"p-series with p = {schedule.p:g} > 1")
        return AdmissibilityReport(
            "sum-finite", False, f"p-series with p = {schedule.p:g} <= 1")
    if condition == "weighted-sum-finite":
        if step is None:
            return AdmissibilityReport(
                "weighted-sum-finite", None, "no step schedule supplied")
        if schedule.c == 0.0:
            return AdmissibilityReport("weighted-sum-finite", True,
                                       "zero variance")
        q = step.decay_exponent()
        if q is None:
            return AdmissibilityReport(
                "weighted-sum-finite", None,
                f"no closed form for steps of kind {step.kind!r}")
        p = 0.0 if schedule.kind == "constant" else schedule.p
        total = 2 * q + p
        if total > 1:
            return AdmissibilityReport(
                "weighted-sum-finite", True,
                f"p-series exponent 2*{q:g} + {p:g} = {total:g} > 1")
        return AdmissibilityReport(
            "weighted-sum-finite", False,
            f"p-series exponent 2*{q:g} + {p:g} = {total:g} <= 1")
    raise ValueError(f"unknown condition {condition!r}")
