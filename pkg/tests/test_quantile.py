import math
import sys
import unittest
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from bw_payoff.errors import DomainError, IntegrationError
from bw_payoff.market import MarketModel
from bw_payoff.preferences import UtilitySpec
from bw_payoff.quantile import (
    AffineLognormalCurve,
    ClosedFormCurve,
    ConstantCurve,
    LognormalCurve,
    QuadratureSpec,
    StepCurve,
    TabulatedCurve,
    build_grid,
    cost_functional,
    crossing_probability,
    curve_mean,
    curve_table,
    evaluate,
    expected_utility,
)
from bw_payoff.strategies import StrategySpec, strategy_quantile


class TestCurves(unittest.TestCase):
    def test_constant_and_lognormal(self):
        self.assertEqual(evaluate(ConstantCurve(1.0), 0.3), 1.0)
        self.assertAlmostEqual(evaluate(LognormalCurve(0.0, 1.0), 0.5), 1.0, places=14)
        vals = LognormalCurve(0.1, 0.3)(np.array([0.1, 0.5, 0.9]))
        self.assertEqual(vals.shape, (3,))
        self.assertTrue(np.all(np.diff(vals) > 0))

    def test_affine_lognormal(self):
        c = AffineLognormalCurve(weight=0.15, mu=0.0, sigma=0.2, shift=0.85)
        self.assertAlmostEqual(c(0.5), 1.0, places=14)

    def test_levels_outside_unit_interval_rejected(self):
        for t in (0.0, 1.0, -0.1, 1.5):
            with self.assertRaises(DomainError):
                ConstantCurve(1.0)(t)

    def test_step_is_left_continuous(self):
        c = StepCurve((0.9, 1.2), (0.3,))
        self.assertEqual(c(0.3), 0.9)
        self.assertEqual(c(0.3 + 1e-12), 1.2)
        self.assertEqual(c(0.01), 0.9)
        self.assertEqual(c.breakpoints, (0.3,))

    def test_step_validation(self):
        with self.assertRaises(DomainError):
            StepCurve((1.0, 0.5), (0.5,))
        with self.assertRaises(DomainError):
            StepCurve((0.5, 1.0), (1.0,))
        with self.assertRaises(DomainError):
            StepCurve((0.5, 1.0, 2.0), (0.5,))

    def test_tabulated(self):
        c = TabulatedCurve((0.2, 0.8), (1.0, 2.0))
        self.assertAlmostEqual(c(0.5), 1.5, places=14)
        self.assertEqual(c(0.1), 1.0)
        self.assertEqual(c(0.95), 2.0)
        with self.assertRaises(DomainError):
            TabulatedCurve((0.5, 0.4), (1.0, 2.0))
        with self.assertRaises(DomainError):
            TabulatedCurve((0.4, 0.5), (2.0, 1.0))

    def test_closed_form_caches_per_grid(self):
        calls = []

        def ev(t):
            calls.append(len(t))
            return 2.0 * np.asarray(t)

        c = ClosedFormCurve(ev, label="linear")
        g = build_grid(QuadratureSpec(panels=16))
        a = c.on_grid(g)
        b = c.on_grid(g)
        self.assertIs(a, b)
        self.assertEqual(len(calls), 1)
        self.assertAlmostEqual(c(0.25), 0.5, places=14)

    def test_curve_table_levels(self):
        ts, vals = curve_table(ConstantCurve(2.0), points=9)
        np.testing.assert_allclose(ts, np.arange(1, 10) / 10.0)
        self.assertTrue(np.all(vals == 2.0))


class TestQuadrature(unittest.TestCase):
    def test_spec_validation(self):
        with self.assertRaises(DomainError):
            QuadratureSpec(clip=0.0)
        with self.assertRaises(DomainError):
            QuadratureSpec(clip=0.02)
        with self.assertRaises(DomainError):
            QuadratureSpec(panels=10, nodes_per_panel=4)

    def test_grid_shape(self):
        g = build_grid()
        self.assertEqual(g.size, 256 * 4 + 2)
        self.assertAlmostEqual(float(g.w.sum()), 1.0, places=13)
        self.assertTrue(np.all(np.diff(g.t) > 0))
        self.assertEqual(g.t[0], 1e-6)
        self.assertAlmostEqual(g.tail_mass, 2e-6)

    def test_breakpoints_become_panel_edges(self):
        c = StepCurve((0.0, 1.0), (0.3,))
        self.assertAlmostEqual(curve_mean(c), 0.7, delta=1e-12)

    def test_non_finite_integrand_reports_node(self):
        g = build_grid(QuadratureSpec(panels=16))
        vals = np.ones(g.size)
        vals[5] = np.nan
        with self.assertRaises(IntegrationError) as cm:
            g.integrate(vals)
        self.assertAlmostEqual(cm.exception.node, g.t[5])


class TestFunctionals(unittest.TestCase):
    def setUp(self):
        self.market = MarketModel()

    def test_cost_of_constant(self):
        self.assertAlmostEqual(cost_functional(ConstantCurve(1.0), self.market), 1.0, delta=1e-10)
        m = MarketModel(r=0.03, mu_s=0.08)
        self.assertAlmostEqual(cost_functional(ConstantCurve(2.0), m), 2.0 * math.exp(-0.15), delta=1e-9)

    def test_acceptable_strategies_cost_the_budget(self):
        for spec in (
            StrategySpec("constant_mix", self.market, weight=0.175),
            StrategySpec("buy_and_hold", self.market, weight=0.15),
            StrategySpec("digital", self.market, low=0.9, q=0.05),
        ):
            self.assertAlmostEqual(cost_functional(strategy_quantile(spec), self.market), 1.0, delta=1e-6)

    def test_cost_is_affine_and_monotone(self):
        g1 = LognormalCurve(0.0, 0.2)
        g2 = AffineLognormalCurve(weight=0.5, mu=0.0, sigma=0.5, shift=0.5)
        w = 0.3
        mix = ClosedFormCurve(lambda t: w * g1(t) + (1 - w) * g2(t))
        expected = w * cost_functional(g1, self.market) + (1 - w) * cost_functional(g2, self.market)
        self.assertAlmostEqual(cost_functional(mix, self.market), expected, delta=1e-10)
        shifted = ClosedFormCurve(lambda t: g1(t) + 0.1)
        self.assertGreater(cost_functional(shifted, self.market), cost_functional(g1, self.market))

    def test_expected_log_utility(self):
        log_u = UtilitySpec(1.0)
        self.assertAlmostEqual(expected_utility(ConstantCurve(1.0), log_u), 0.0, places=14)
        self.assertAlmostEqual(expected_utility(ConstantCurve(math.e), log_u), 1.0, places=12)
        cm = strategy_quantile(StrategySpec("constant_mix", self.market, weight=0.175))
        self.assertAlmostEqual(expected_utility(cm, log_u), cm.mu, delta=1e-12)

    def test_jensen(self):
        c = LognormalCurve(0.05, 0.3)
        for gamma in (1.0, 1.5, 3.0):
            u = UtilitySpec(gamma)
            self.assertLessEqual(expected_utility(c, u), u.utility(curve_mean(c)))

    def test_log_utility_of_zero_wealth_rejected(self):
        with self.assertRaises(IntegrationError):
            expected_utility(StepCurve((0.0, 1.0), (0.5,)), UtilitySpec(1.0))


def test_crossing_probability_of_median_crossing():
    assert crossing_probability(LognormalCurve(0.0, 1.0), ConstantCurve(1.0)) == pytest.approx(0.5, abs=1e-9)


def test_crossing_probability_of_step():
    p = crossing_probability(StepCurve((0.5, 2.0), (0.2,)), ConstantCurve(1.0), points=999)
    assert p == pytest.approx(0.2, abs=1e-3)


def test_crossing_probability_never_below():
    assert crossing_probability(ConstantCurve(2.0), ConstantCurve(1.0)) == 0.0


if __name__ == "__main__":
    unittest.main(verbosity=2)
