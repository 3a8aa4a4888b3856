import numpy as np
import pytest

from partialtau.errors import DegenerateWindow, InvalidConfig, LengthMismatch, TooFewObservations
from partialtau.lowess import _local_fit, lowess, tricube
from partialtau.models import Dataset, ModelSpec, fit
from partialtau.surrogate import normalize, residual_matrix


class TestLowess:
    def test_constant(self, gen):
        x = gen.normal(size=40)
        c = lowess(x, np.full(40, 2.5))
        np.testing.assert_allclose(c.smooth, 2.5, atol=1e-12)
        assert np.all(np.diff(c.x) >= 0)

    def test_line_reproduced(self, gen):
        x = gen.uniform(-3, 3, 60)
        c = lowess(x, 2 * x + 1, frac=0.5)
        np.testing.assert_allclose(c.smooth, 2 * c.x + 1, atol=1e-8)

    def test_direct_wls_oracle(self, gen):
        x = np.sort(gen.uniform(0, 1, 12))
        y = np.sin(6 * x) + gen.normal(0, 0.1, 12)
        c = lowess(x, y, frac=1.0, iters=0)
        for i, x0 in enumerate(x):
            d = np.abs(x - x0)
            w = tricube(d / d.max())
            D = np.column_stack([np.ones(12), x - x0])
            coef = np.linalg.solve(D.T @ (w[:, None] * D), D.T @ (w * y))
            assert c.smooth[i] == pytest.approx(coef[0], abs=1e-10)

    def test_matches_statsmodels(self, gen):
        sm = pytest.importorskip("statsmodels.nonparametric.smoothers_lowess")
        x = gen.uniform(0, 10, 150)
        y = np.sin(x) + gen.standard_t(3, 150) * 0.3
        c = lowess(x, y, frac=0.3, iters=3)
        ref = sm.lowess(y, x, frac=0.3, it=3, delta=0.0, return_sorted=True)
        np.testing.assert_allclose(c.x, ref[:, 0])
        np.testing.assert_allclose(c.smooth, ref[:, 1], atol=1e-8)

    def test_robust_to_outlier(self, gen):
        x = np.linspace(0, 1, 50)
        y = x.copy()
        y[25] = 50.0
        c = lowess(x, y, frac=0.5, iters=3)
        np.testing.assert_allclose(np.delete(c.smooth, 25), np.delete(x, 25), atol=1e-8)

    def test_flat_under_independence(self):
        # residual pairs of two conditionally independent linear outcomes
        flat = 0
        for seed in range(20):
            g = np.random.default_rng(seed)
            X = g.normal(size=(3000, 1))
            h = []
            for y in (X[:, 0] + g.normal(size=3000), -X[:, 0] + g.normal(size=3000)):
                ds = Dataset(y, X)
                h.append(normalize(residual_matrix(fit(ModelSpec.linear(), ds), ds, 1, 0).column(0)))
            c = lowess(*h)
            lo, hi = np.quantile(c.x, [0.1, 0.9])
            mid = (c.x >= lo) & (c.x <= hi)
            flat += np.max(np.abs(c.smooth[mid])) < 0.1
        assert flat >= 18

    def test_errors(self):
        with pytest.raises(TooFewObservations):
            lowess(np.arange(4.0), np.arange(4.0))
        with pytest.raises(InvalidConfig):
            lowess(np.arange(10.0), np.arange(10.0), frac=0.0)
        with pytest.raises(LengthMismatch):
            lowess(np.arange(10.0), np.arange(9.0))
        with pytest.raises(InvalidConfig):
            lowess(np.r_[np.arange(9.0), np.nan], np.arange(10.0))

    def test_degenerate_window(self):
        with pytest.raises(DegenerateWindow):
            _local_fit(np.arange(3.0), np.arange(3.0), 1.0, np.zeros(3))
