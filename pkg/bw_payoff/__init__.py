"""bw_payoff: expected-utility optimal payoffs under a budget and a
Bregman-Wasserstein divergence constraint to a benchmark."""

from .bregman import (
    BregmanGenerator,
    bregman_divergence,
    bw_divergence,
    generator_derivative,
    generator_derivative_inverse,
    generator_second_derivative,
    generator_value,
    make_generator,
)
from .errors import (
    BWPayoffError,
    ConfigError,
    DomainError,
    InfeasibleError,
    IntegrationError,
    SolverError,
    UnboundedArgmin,
)
from .market import MarketModel, payoff_curve, payoff_from_quantile
from .optimizer import (
    Multipliers,
    OptimalSolution,
    ProblemSpec,
    check_wellposedness,
    epsilon_min,
    merton_curve,
    minimize_pointwise,
    pointwise_minimizer,
    solve,
)
from .preferences import UtilitySpec
from .quantile import (
    AffineLognormalCurve,
    ClosedFormCurve,
    ConstantCurve,
    LognormalCurve,
    QuadratureSpec,
    QuantileCurve,
    StepCurve,
    TabulatedCurve,
    cost_functional,
    crossing_probability,
    evaluate,
    expected_utility,
)
from .strategies import StrategySpec, select_tolerance, strategy_quantile

__version__ = "0.1.0"

__all__ = [
    "AffineLognormalCurve",
    "BWPayoffError",
    "BregmanGenerator",
    "ClosedFormCurve",
    "ConfigError",
    "ConstantCurve",
    "DomainError",
    "InfeasibleError",
    "IntegrationError",
    "LognormalCurve",
    "MarketModel",
    "Multipliers",
    "OptimalSolution",
    "ProblemSpec",
    "QuadratureSpec",
    "QuantileCurve",
    "SolverError",
    "StepCurve",
    "StrategySpec",
    "TabulatedCurve",
    "UnboundedArgmin",
    "UtilitySpec",
    "bregman_divergence",
    "bw_divergence",
    "check_wellposedness",
    "cost_functional",
    "crossing_probability",
    "epsilon_min",
    "evaluate",
    "expected_utility",
    "generator_derivative",
    "generator_derivative_inverse",
    "generator_second_derivative",
    "generator_value",
    "make_generator",
    "merton_curve",
    "minimize_pointwise",
    "payoff_curve",
    "payoff_from_quantile",
    "pointwise_minimizer",
    "select_tolerance",
    "solve",
    "strategy_quantile",
]
