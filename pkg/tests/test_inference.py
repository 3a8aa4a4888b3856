import numpy as np
import pytest

from partialtau.assoc import PairData, partial_t
from partialtau.errors import InvalidAlpha, InvalidConfig, TooFewReplicates, TooManyFailures
from partialtau.inference import (
    BootstrapConfig,
    BootstrapDistribution,
    bootstrap_moderation,
    bootstrap_moderation_difference,
    bootstrap_t,
    p_value_composite,
    p_value_simple,
    summarize,
)
from partialtau.models import ModelSpec
from partialtau.rng import RngStream


def _dist(values):
    return BootstrapDistribution(np.asarray(values, dtype=float), 0)


def _pair(n, seed, strength=0.5):
    g = np.random.default_rng(seed)
    X = g.normal(size=(n, 1))
    z = g.normal(size=n)
    y1 = np.digitize(X[:, 0] + strength * z + g.logistic(size=n), [-1.0, 0.0, 1.0]) + 1
    y2 = X[:, 0] + strength * z + g.normal(size=n)
    return PairData(y1, y2, X)


SPECS = (ModelSpec.cumulative(4), ModelSpec.linear())


class TestConfig:
    def test_defaults(self):
        cfg = BootstrapConfig()
        assert (cfg.B, cfg.M, cfg.alpha) == (1000, 30, 0.05)

    @pytest.mark.parametrize("kw", [{"B": 0}, {"M": 0}, {"max_refit_retries": -1}, {"n_jobs": 0}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidConfig):
            BootstrapConfig(**kw)

    def test_invalid_alpha(self):
        with pytest.raises(InvalidAlpha):
            BootstrapConfig(alpha=1.0)


class TestSummaries:
    def test_se_and_ci(self):
        v = np.arange(1, 1001) / 1000.0
        s = summarize(_dist(v), 0.05)
        assert s.se == pytest.approx(np.std(v, ddof=1))
        # averaged inverted cdf: midpoint of order statistics 25/26 and 975/976
        assert s.ci_lo == pytest.approx(0.0255)
        assert s.ci_hi == pytest.approx(0.9755)

    def test_ecdf(self):
        d = _dist([0.3, -0.1, 0.2, 0.2])
        assert d.ecdf(0.2) == 0.75
        assert d.ecdf(-1.0) == 0.0

    def test_p_simple(self):
        v = np.r_[np.full(30, -0.1), np.full(170, 0.1)]
        assert p_value_simple(_dist(v)) == pytest.approx(0.3)
        assert p_value_simple(_dist(np.full(200, 0.1))) == 0.0

    def test_p_simple_examples(self):
        v = np.r_[np.full(25, -0.1), np.full(975, 0.1)]
        assert p_value_simple(_dist(v)) == pytest.approx(0.05)
        assert p_value_simple(_dist(np.r_[np.full(100, -1.0), np.full(100, 1.0)])) == 1.0

    def test_p_composite_examples(self):
        # symmetric about zero with 90% inside (-delta, delta)
        v = np.r_[np.full(50, -0.5), np.linspace(-0.09, 0.09, 900), np.full(50, 0.5)]
        assert p_value_composite(_dist(v), 0.1) == pytest.approx(0.1)
        assert p_value_composite(_dist(np.full(200, 0.3)), 0.1) == 0.0
        # delta = 0 gives 2 F(0)
        w = np.r_[np.full(30, -0.1), np.full(170, 0.1)]
        assert p_value_composite(_dist(w), 0.0) == pytest.approx(0.3)

    def test_ci_uniform_grid(self):
        s = summarize(_dist(np.arange(1, 1001) / 1000.0), 0.05)
        assert abs(s.ci_lo - 0.025) <= 1e-3 and abs(s.ci_hi - 0.975) <= 1e-3

    def test_p_simple_needs_replicates(self):
        with pytest.raises(TooFewReplicates):
            p_value_simple(_dist(np.zeros(50)))

    def test_p_composite_literal(self):
        v = np.linspace(0.0, 0.4, 201)
        d = _dist(v)
        f_hi, f_lo = d.ecdf(0.1), d.ecdf(-0.1)
        assert p_value_composite(d, 0.1) == pytest.approx(min(1.0, 2 * min(f_hi, f_lo)))

    def test_p_composite_mirrored_monotone(self):
        half = np.random.default_rng(0).normal(0, 0.05, 200)
        base = np.r_[half, -half]
        ps = [p_value_composite(_dist(base + s), 0.1, mirrored=True) for s in (0.0, 0.1, 0.2, 0.3)]
        assert all(a >= b for a, b in zip(ps, ps[1:]))
        neg = [p_value_composite(_dist(base - s), 0.1, mirrored=True) for s in (0.0, 0.1, 0.2, 0.3)]
        assert neg == pytest.approx(ps)

    def test_p_composite_negative_delta(self):
        with pytest.raises(InvalidConfig):
            p_value_composite(_dist(np.zeros(200)), -0.1)

    def test_read_only(self):
        d = _dist([1.0, 2.0])
        with pytest.raises(ValueError):
            d.replicates[0] = 3.0


class TestBootstrap:
    def test_deterministic_and_estimate(self):
        data = _pair(150, 1)
        cfg = BootstrapConfig(B=40, M=5, seed=3)
        a = bootstrap_t(data, *SPECS, cfg=cfg)
        b = bootstrap_t(data, *SPECS, cfg=cfg)
        np.testing.assert_array_equal(a.replicates, b.replicates)
        est = partial_t(data.y1, data.y2, data.X, *SPECS, M=5, rng=RngStream(3, (0,)))
        assert a.estimate == est.t_hat
        assert len(a.replicates) + a.failures == 40

    def test_parallel_matches_serial(self):
        data = _pair(120, 2)
        s = bootstrap_t(data, *SPECS, cfg=BootstrapConfig(B=24, M=3, seed=1))
        p = bootstrap_t(data, *SPECS, cfg=BootstrapConfig(B=24, M=3, seed=1, n_jobs=2))
        np.testing.assert_array_equal(s.replicates, p.replicates)

    def test_prefix_stable_in_B(self):
        data = _pair(120, 3)
        small = bootstrap_t(data, *SPECS, cfg=BootstrapConfig(B=10, M=3))
        big = bootstrap_t(data, *SPECS, cfg=BootstrapConfig(B=20, M=3))
        np.testing.assert_array_equal(small.replicates, big.replicates[:10])
        assert small.estimate == big.estimate

    def test_marginal_kind(self):
        data = _pair(120, 4)
        d = bootstrap_t(data, *SPECS, cfg=BootstrapConfig(B=10, M=3), kind="marginal")
        assert d.target["statistic"] == "t_marginal"

    def test_positive_association_detected(self):
        data = _pair(300, 5, strength=1.5)
        d = bootstrap_t(data, *SPECS, cfg=BootstrapConfig(B=200, M=10))
        assert p_value_simple(d) < 0.05
        s = summarize(d)
        assert s.ci_lo < d.estimate < s.ci_hi

    def test_too_many_failures(self):
        # a rare top category makes most resamples lose it
        g = np.random.default_rng(6)
        y1 = np.r_[np.ones(60, int), np.full(60, 2), [3]]
        data = PairData(y1, g.normal(size=121), g.normal(size=(121, 1)))
        with pytest.raises(TooManyFailures):
            bootstrap_t(data, ModelSpec.cumulative(3), ModelSpec.linear(), cfg=BootstrapConfig(B=20, M=2, max_refit_retries=0))

    def test_moderation(self):
        data = _pair(200, 7)
        d = bootstrap_moderation(data, *SPECS, cfg=BootstrapConfig(B=20, M=5))
        assert d.target["statistic"] == "pct_change"
        assert np.all(np.isfinite(d.replicates))
        assert d.estimate < 0

    def test_moderation_difference(self):
        a, b = _pair(150, 8), _pair(150, 9)
        cfg = BootstrapConfig(B=10, M=3)
        diff = bootstrap_moderation_difference(a, b, *SPECS, cfg=cfg)
        assert len(diff.replicates) == 10
        assert np.isfinite(diff.estimate)

    def test_same_cohort_twice(self):
        a = _pair(150, 10)
        diff = bootstrap_moderation_difference(a, a, *SPECS, cfg=BootstrapConfig(B=100, M=3))
        assert abs(np.median(diff.replicates)) < np.std(diff.replicates)
        assert p_value_simple(diff) > 0.2
