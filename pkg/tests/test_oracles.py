"""Stochastic oracle contracts: unbiasedness, reproducibility, validators."""

import numpy as np
import pytest

from opsplit.operators import LipschitzMonotoneMap, identity_map
from opsplit.oracles import (
    StochasticOracle,
    VarianceSchedule,
    make_oracle,
    validate_variance,
)
from opsplit.schedules import StepSchedule


class TestExactModel:
    def test_draw_equals_base(self):
        o = StochasticOracle(identity_map(dim=2), noise="exact")
        assert np.array_equal(o.draw(0, [1.0, 2.0]), [1.0, 2.0])

    def test_no_randomness_consumed(self):
        o1 = StochasticOracle(identity_map(dim=2), noise="exact", seed=0)
        o2 = StochasticOracle(identity_map(dim=2), noise="exact", seed=99)
        for n in range(20):
            y = np.array([float(n), -1.0])
            assert np.array_equal(o1.draw(n, y), o2.draw(n, y))

    def test_every_n(self):
        o = StochasticOracle(identity_map(dim=2), noise="exact")
        for n in (-1, 0, 5, 10**6):
            assert np.array_equal(o.draw(n, [0.5, 0.5]), [0.5, 0.5])


class TestGaussianModel:
    def test_zero_sigma_degenerates_to_exact(self):
        o = StochasticOracle(identity_map(dim=3), noise="gaussian",
                             variance=VarianceSchedule("constant", 0.0), seed=1)
        assert np.array_equal(o.draw(0, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_reproducible(self):
        mk = lambda: StochasticOracle(
            identity_map(dim=4), noise="gaussian",
            variance=VarianceSchedule("constant", 1.0), seed=7)
        o1, o2 = mk(), mk()
        y = np.arange(4.0)
        draws1 = [o1.draw(n, y) for n in range(50)]
        draws2 = [o2.draw(n, y) for n in range(50)]
        assert all(np.array_equal(a, b) for a, b in zip(draws1, draws2))

    def test_init_draw_is_conditional_mean(self):
        o = StochasticOracle(identity_map(dim=2), noise="gaussian",
                             variance=VarianceSchedule("power", 1.0, 2.0), seed=3)
        assert np.array_equal(o.draw(-1, [1.0, 1.0]), [1.0, 1.0])

    def test_total_variance_matches_schedule(self):
        sched = VarianceSchedule("constant", 2.0)
        o = StochasticOracle(identity_map(dim=5), noise="gaussian",
                             variance=sched, seed=0)
        y = np.zeros(5)
        errs = np.array([np.sum((o.draw(0, y) - y) ** 2) for _ in range(20000)])
        # E ||r - By||^2 = sigma^2; tolerate 5 standard errors
        assert abs(errs.mean() - 2.0) <= 5 * errs.std(ddof=1) / np.sqrt(errs.size)


class TestMinibatchModel:
    def test_two_component_enumeration(self):
        # components 2x and 0: single-sample draws are 2y or 0, mean is y
        comps = [LipschitzMonotoneMap(lambda x: 2 * x, mu=2.0, dim=1),
                 LipschitzMonotoneMap(np.zeros_like, mu=0.0, dim=1)]
        base = identity_map(dim=1)
        o = StochasticOracle(base, noise="minibatch", components=comps,
                             batch_size=1, seed=12)
        y = np.array([1.0])
        draws = np.array([o.draw(n, y)[0] for n in range(100_000)])
        values = set(np.unique(draws))
        assert values <= {0.0, 2.0}
        sd = draws.std(ddof=1)
        assert abs(draws.mean() - 1.0) <= 4 * sd / np.sqrt(draws.size)

    def test_needs_components(self):
        with pytest.raises(ValueError):
            StochasticOracle(identity_map(dim=1), noise="minibatch")


class TestUnbiasednessMonteCarlo:
    N_DRAWS = 100_000

    def _check(self, oracle, y):
        y = np.asarray(y, dtype=float)
        by = oracle.base(y)
        draws = np.stack([oracle.draw(n, y) for n in range(self.N_DRAWS)])
        mean = draws.mean(axis=0)
        sd = draws.std(axis=0, ddof=1)
        bound = 4 * sd / np.sqrt(self.N_DRAWS)
        assert np.all(np.abs(mean - by) <= bound + 1e-15)

    def test_gaussian_unbiased(self):
        o = StochasticOracle(identity_map(dim=2), noise="gaussian",
                             variance=VarianceSchedule("constant", 0.5), seed=5)
        self._check(o, [0.3, -1.2])

    def test_minibatch_unbiased(self):
        comps = [LipschitzMonotoneMap(lambda x: 2 * x, mu=2.0, dim=2),
                 LipschitzMonotoneMap(np.zeros_like, mu=0.0, dim=2)]
        o = StochasticOracle(identity_map(dim=2), noise="minibatch",
                             components=comps, batch_size=2, seed=6)
        self._check(o, [1.0, 2.0])


class TestValidateVariance:
    def test_power_two_sum_finite(self):
        r = validate_variance(VarianceSchedule("power", 1.0, 2.0), None,
                              "sum-finite")
        assert r.passed is True

    def test_constant_bounded(self):
        r = validate_variance(VarianceSchedule("constant", 1.0), None, "bounded")
        assert r.passed is True

    def test_harmonic_sum_diverges(self):
        r = validate_variance(VarianceSchedule("power", 1.0, 1.0), None,
                              "sum-finite")
        assert r.passed is False

    def test_constant_sum_diverges(self):
        r = validate_variance(VarianceSchedule("constant", 1.0), None,
                              "sum-finite")
        assert r.passed is False

    def test_weighted_combination(self):
        # gamma_n ~ n^-0.6 and sigma_n^2 ~ n^-2: exponent 3.2 > 1
        step = StepSchedule("power_decay", gamma0=0.2, p=0.6)
        var = VarianceSchedule("power", 1.0, 2.0)
        assert validate_variance(var, step, "weighted-sum-finite").passed is True
        # constant steps and constant variance diverge
        step2 = StepSchedule("constant", gamma=0.1)
        var2 = VarianceSchedule("constant", 1.0)
        assert validate_variance(var2, step2, "weighted-sum-finite").passed is False

    def test_missing_step_is_undecidable(self):
        r = validate_variance(VarianceSchedule("constant", 1.0), None,
                              "weighted-sum-finite")
        assert r.passed is None

    def test_unknown_condition_rejected(self):
        with pytest.raises(ValueError):
            validate_variance(VarianceSchedule("constant", 1.0), None, "??")


def test_make_oracle_roundtrip():
    spec = {"noise": "gaussian", "variance": {"kind": "power", "c": 2.0, "p": 1.5}}
    o = make_oracle(identity_map(dim=2), spec, seed=4)
    assert o.noise == "gaussian"
    assert o.variance.variance(0) == 2.0
    assert o.variance.variance(1) == pytest.approx(2.0 / 2**1.5)
