import math
import sys
import unittest
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from bw_payoff.bregman import make_generator
from bw_payoff.errors import DomainError
from bw_payoff.market import MarketModel
from bw_payoff.quantile import ConstantCurve, LognormalCurve, StepCurve, cost_functional
from bw_payoff.strategies import (
    PRESETS,
    StrategySpec,
    build_curve,
    build_strategy,
    divergence_row,
    get_preset,
    select_tolerance,
    strategy_name,
    strategy_quantile,
)


class TestStrategyCurves(unittest.TestCase):
    def setUp(self):
        self.m = MarketModel()

    def test_constant_mix_parameters(self):
        c = strategy_quantile(StrategySpec("constant_mix", self.m, weight=0.175))
        self.assertIsInstance(c, LognormalCurve)
        self.assertAlmostEqual(c.mu, 0.042984375, places=12)
        self.assertAlmostEqual(c.sigma, 0.175 * 0.1 * math.sqrt(5.0), places=14)

    def test_zero_weight_is_cash(self):
        for kind in ("constant_mix", "buy_and_hold"):
            c = strategy_quantile(StrategySpec(kind, self.m, weight=0.0))
            self.assertIsInstance(c, ConstantCurve)
            self.assertEqual(c.level, 1.0)

    def test_buy_and_hold_parameters(self):
        c = strategy_quantile(StrategySpec("buy_and_hold", self.m, weight=0.15, budget=2.0))
        self.assertAlmostEqual(c.weight, 0.3)
        self.assertAlmostEqual(c.shift, 1.7)
        self.assertAlmostEqual(c.mu, (0.05 - 0.005) * 5.0)

    def test_digital_levels(self):
        s = StrategySpec("digital", self.m, low=0.9, q=0.05)
        self.assertAlmostEqual(s.digital_high, (1.0 - 0.9 * 0.05) / 0.95, places=14)
        c = strategy_quantile(s)
        self.assertIsInstance(c, StepCurve)
        self.assertEqual(c(s.digital_jump), 0.9)
        # physical jump sits at P(S_T < c) with Q(S_T < c) = q
        self.assertGreater(s.digital_jump, 0.0)
        self.assertLess(s.digital_jump, 0.05)
        rn = StrategySpec("digital", self.m, low=0.9, q=0.05, breakpoint="risk_neutral")
        self.assertEqual(rn.digital_jump, 0.05)

    def test_digital_physical_costs_the_budget(self):
        for low, q in ((0.9, 0.05), (0.8, 0.1), (0.5, 0.3)):
            c = strategy_quantile(StrategySpec("digital", self.m, low=low, q=q))
            self.assertAlmostEqual(cost_functional(c, self.m), 1.0, delta=1e-6)

    def test_digital_risk_neutral_is_affordable(self):
        c = strategy_quantile(StrategySpec("digital", self.m, low=0.9, q=0.05, breakpoint="risk_neutral"))
        self.assertLess(cost_functional(c, self.m), 1.0)

    def test_validation(self):
        with self.assertRaises(DomainError):
            StrategySpec("constant_mix", self.m, weight=1.5)
        with self.assertRaises(DomainError):
            StrategySpec("lottery", self.m)
        with self.assertRaises(DomainError):
            StrategySpec("digital", self.m, low=2.0, q=0.05)
        with self.assertRaises(DomainError):
            StrategySpec("digital", self.m, low=0.9, q=0.05, breakpoint="sideways")

    def test_names(self):
        self.assertEqual(strategy_name(StrategySpec("constant_mix", self.m, weight=0.175)), "constant-mix 17.5%")
        self.assertEqual(strategy_name(StrategySpec("digital", self.m, low=0.9, q=0.05)), "digital low=0.9 q=0.05")


class TestTolerance(unittest.TestCase):
    def setUp(self):
        self.m = MarketModel()
        p = get_preset("example1")
        self.strategies = [build_strategy(b, self.m) for b in p.strategies]
        self.benchmark = build_curve(p.benchmark, self.m)

    def test_select_is_row_max(self):
        for kind, expected in (("quadratic", 0.003717), ("entropic", 0.001799)):
            gen = make_generator(kind)
            row = divergence_row(self.strategies, self.benchmark, gen)
            eps = select_tolerance(self.strategies, self.benchmark, gen)
            self.assertEqual(eps, max(row))
            self.assertAlmostEqual(eps, expected, delta=0.02 * expected)

    def test_identical_strategy_gives_zero(self):
        cash = StrategySpec("buy_and_hold", self.m, weight=0.0)
        self.assertEqual(select_tolerance([cash], ConstantCurve(1.0), make_generator("quadratic")), 0.0)

    def test_empty_list(self):
        with self.assertRaises(DomainError):
            select_tolerance([], self.benchmark, make_generator("quadratic"))


class TestPresets(unittest.TestCase):
    def test_known_presets(self):
        self.assertEqual(sorted(PRESETS), ["example1", "example2"])
        with self.assertRaises(DomainError):
            get_preset("example9")

    def test_build_curve_kinds(self):
        m = MarketModel()
        self.assertIsInstance(build_curve({"kind": "constant", "level": 1.0}, m), ConstantCurve)
        self.assertIsInstance(build_curve({"kind": "constant_mix", "weight": 0.8}, m), LognormalCurve)
        step = build_curve({"kind": "step", "levels": [0.5, 1.0], "breaks": [0.4]}, m)
        self.assertEqual(step(0.4), 0.5)
        tab = build_curve({"kind": "tabulated", "nodes": [0.1, 0.9], "values": [1.0, 2.0]}, m)
        self.assertAlmostEqual(tab(0.5), 1.5)
        with self.assertRaises(DomainError):
            build_curve({"kind": "spline"}, m)
        with self.assertRaises(DomainError):
            build_curve({"kind": "constant", "height": 1.0}, m)
        with self.assertRaises(DomainError):
            build_strategy({"kind": "digital", "strike": 1.0}, m)


# Expected divergences of the acceptable strategies: rows per generator,
# columns constant-mix / buy-and-hold / digital.
EXAMPLE1_PLAIN = {
    "quadratic": (0.003673, 0.003717, 0.000526),
    "entropic": (0.001785, 0.001799, 0.000272),
}


@pytest.mark.parametrize("kind", sorted(EXAMPLE1_PLAIN))
def test_example1_divergences(kind):
    m = MarketModel()
    p = get_preset("example1")
    strategies = [build_strategy(b, m) for b in p.strategies]
    row = divergence_row(strategies, build_curve(p.benchmark, m), make_generator(kind))
    for got, want in zip(row, EXAMPLE1_PLAIN[kind]):
        assert got == pytest.approx(want, rel=0.02)


if __name__ == "__main__":
    unittest.main(verbosity=2)
