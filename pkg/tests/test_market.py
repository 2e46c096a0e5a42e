import math
import sys
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from bw_payoff.errors import DomainError
from bw_payoff.market import MarketModel, payoff_curve, payoff_from_quantile, payoff_price, stock_grid
from bw_payoff.optimizer import merton_curve
from bw_payoff.preferences import UtilitySpec
from bw_payoff.quantile import ConstantCurve, cost_functional
from bw_payoff.strategies import StrategySpec, strategy_quantile


class TestMarketModel(unittest.TestCase):
    def setUp(self):
        self.m = MarketModel()

    def test_derived_parameters(self):
        self.assertAlmostEqual(self.m.theta, 0.5, places=14)
        self.assertAlmostEqual(self.m.mu_phi, -0.625, places=14)
        self.assertAlmostEqual(self.m.sigma_phi, 0.5 * math.sqrt(5.0), places=14)

    def test_spd_quantile(self):
        self.assertAlmostEqual(self.m.spd_quantile(0.5), math.exp(-0.625), places=14)
        t = np.array([0.01, 0.3, 0.7, 0.99])
        np.testing.assert_allclose(self.m.spd_cdf(self.m.spd_quantile(t)), t, rtol=1e-12)
        np.testing.assert_allclose(self.m.pricing_kernel(t), self.m.spd_quantile(1.0 - t), rtol=1e-10)

    def test_spd_has_unit_price(self):
        # E[phi_T] = e^{-rT}: the price of one unit of cash
        self.assertAlmostEqual(cost_functional(ConstantCurve(1.0), self.m), 1.0, delta=1e-10)

    def test_stock_laws(self):
        t = np.array([0.05, 0.5, 0.95])
        for measure in ("P", "Q"):
            np.testing.assert_allclose(self.m.stock_cdf(self.m.stock_quantile(t, measure), measure), t, rtol=1e-12)
        self.assertGreater(self.m.stock_quantile(0.5, "P"), self.m.stock_quantile(0.5, "Q"))
        with self.assertRaises(DomainError):
            self.m.stock_log_params("R")

    def test_spd_decreasing_in_stock(self):
        s = stock_grid()
        self.assertTrue(np.all(np.diff(self.m.spd_of_stock(s)) < 0))

    def test_validation(self):
        with self.assertRaises(DomainError):
            MarketModel(mu_s=0.0, r=0.0)
        with self.assertRaises(DomainError):
            MarketModel(sigma_s=0.0)
        with self.assertRaises(DomainError):
            MarketModel(T=-1.0)
        with self.assertRaises(DomainError):
            stock_grid(2.0, 1.0)


class TestPayoffMap(unittest.TestCase):
    def setUp(self):
        self.m = MarketModel()
        self.cm = strategy_quantile(StrategySpec("constant_mix", self.m, weight=0.175))

    def test_constant_payoff(self):
        s, x = payoff_curve(ConstantCurve(1.3), self.m)
        self.assertTrue(np.all(x == 1.3))
        self.assertEqual(s.shape, (400,))

    def test_median_stock_gets_median_wealth(self):
        s_med = self.m.S0 * math.exp((self.m.mu_s - 0.5 * self.m.sigma_s ** 2) * self.m.T)
        self.assertAlmostEqual(payoff_from_quantile(self.cm, self.m, s_med), math.exp(self.cm.mu), places=12)

    def test_payoff_non_decreasing_in_stock(self):
        curves = [
            self.cm,
            strategy_quantile(StrategySpec("buy_and_hold", self.m, weight=0.15)),
            strategy_quantile(StrategySpec("digital", self.m, low=0.9, q=0.05)),
            merton_curve(self.m, UtilitySpec(1.5))[0],
        ]
        for c in curves:
            _, x = payoff_curve(c, self.m)
            self.assertTrue(np.all(np.diff(x) >= 0))

    def test_buy_and_hold_payoff_is_linear_in_stock(self):
        bh = strategy_quantile(StrategySpec("buy_and_hold", self.m, weight=0.15))
        s = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(payoff_from_quantile(bh, self.m, s), 0.15 * s + 0.85, rtol=1e-9)

    def test_price_matches_cost_functional(self):
        for c in (self.cm, merton_curve(self.m, UtilitySpec(1.0))[0], merton_curve(self.m, UtilitySpec(1.5))[0]):
            self.assertAlmostEqual(payoff_price(c, self.m), cost_functional(c, self.m), delta=1e-4)


if __name__ == "__main__":
    unittest.main(verbosity=2)
