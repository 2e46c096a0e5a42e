"""Expected-utility maximisation under a budget and a Bregman-Wasserstein constraint.

For multipliers (lam, mu) the optimal quantile at level t minimises

    h_t(y) = -u(y) + mu*phi(y) + lam*y*xi(t) - mu*phi'(b(t))*y,

with xi(t) the pricing kernel and b the benchmark quantile. `solve` searches the
multipliers so that complementary slackness holds: budget-only first, then
divergence-only, then both constraints binding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .bregman import BregmanGenerator
from .errors import DomainError, InfeasibleError, SolverError, UnboundedArgmin
from .market import MarketModel
from .preferences import UtilitySpec
from .quantile import (
    DEFAULT_QUADRATURE,
    ClosedFormCurve,
    LognormalCurve,
    QuadratureGrid,
    QuadratureSpec,
    QuantileCurve,
    expected_utility,
    grid_for,
)
from .rootfind import expand_upper, log_bracket_root, safeguarded_newton

logger = logging.getLogger(__name__)

BINDING_CASES = ("budget_only", "bw_only", "both")


@dataclass(frozen=True)
class Multipliers:
    lam: float = 0.0
    mu: float = 0.0

    def __post_init__(self) -> None:
        for name in ("lam", "mu"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"multiplier {name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    market: MarketModel
    utility: UtilitySpec
    generator: BregmanGenerator
    benchmark: QuantileCurve
    budget: float = 1.0
    epsilon: float = math.inf
    quad: QuadratureSpec = DEFAULT_QUADRATURE

    def __post_init__(self) -> None:
        if not (math.isfinite(self.budget) and self.budget > 0):
            raise DomainError(f"budget x0 must be finite and > 0, got {self.budget!r}")
        if not (self.epsilon > 0):
            raise DomainError(f"tolerance epsilon must be > 0 (or inf), got {self.epsilon!r}")


@dataclass(frozen=True)
class SolverSettings:
    rtol: float = 1e-8
    max_iter: int = 200
    max_outer: int = 100
    y_floor: float = 1e-12
    y_ceiling: float = 1e12
    newton_rtol: float = 1e-12


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True, eq=False)
class OptimalSolution:
    curve: ClosedFormCurve
    multipliers: Multipliers
    binding_case: str
    residuals: Dict[str, Optional[float]]
    expected_utility: float
    cost: float
    divergence: float
    epsilon: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.multipliers.lam,
            "mu": self.multipliers.mu,
            "binding_case": self.binding_case,
            "epsilon": None if math.isinf(self.epsilon) else self.epsilon,
            "cost": self.cost,
            "divergence": self.divergence,
            "expected_utility": self.expected_utility,
            "residuals": dict(self.residuals),
            "diagnostics": dict(self.diagnostics),
        }


# ---- pointwise minimiser ----

def _argmin(
    utility: UtilitySpec,
    generator: BregmanGenerator,
    lam: float,
    mu: float,
    xi: np.ndarray,
    b_slope: Optional[np.ndarray],
    settings: SolverSettings,
) -> Tuple[np.ndarray, np.ndarray]:
    """Root of dh_t/dy at every node; returns (y, unbounded mask), y = inf where unbounded."""
    n = xi.size
    if mu == 0:
        if lam <= 0:
            raise DomainError("multipliers lam and mu cannot both be zero")
        return np.asarray(utility.inverse_marginal(lam * xi), dtype=float), np.zeros(n, dtype=bool)

    c = lam * xi - mu * b_slope

    def g(idx: np.ndarray, y: np.ndarray) -> np.ndarray:
        return -utility.marginal(y) + mu * generator.derivative(y) + c[idx]

    def dg(idx: np.ndarray, y: np.ndarray) -> np.ndarray:
        return utility.curvature(y) + mu * generator.second_derivative(y)

    y = np.full(n, settings.y_floor)
    every = np.arange(n)
    # Inada: dh/dy < 0 near 0 except where the linear term dominates even there
    open_ = np.flatnonzero(g(every, y) < 0)
    unbounded = np.zeros(n, dtype=bool)
    if open_.size == 0:
        return y, unbounded

    def g_open(idx: np.ndarray, yy: np.ndarray) -> np.ndarray:
        return g(open_[idx], yy)

    def dg_open(idx: np.ndarray, yy: np.ndarray) -> np.ndarray:
        return dg(open_[idx], yy)

    lo = np.full(open_.size, settings.y_floor)
    hi, unb = expand_upper(g_open, lo, ceiling=settings.y_ceiling)
    unbounded[open_[unb]] = True
    ok = np.flatnonzero(~unb)
    if ok.size:
        sub = open_[ok]

        def g_ok(idx: np.ndarray, yy: np.ndarray) -> np.ndarray:
            return g(sub[idx], yy)

        def dg_ok(idx: np.ndarray, yy: np.ndarray) -> np.ndarray:
            return dg(sub[idx], yy)

        y[sub] = safeguarded_newton(
            g_ok,
            dg_ok,
            lo[ok],
            hi[ok],
            rtol=settings.newton_rtol,
            maxiter=settings.max_iter,
        )
    y[unbounded] = np.inf
    return y, unbounded


def minimize_pointwise(
    problem: ProblemSpec,
    multipliers: Multipliers,
    ts: Any,
    *,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> np.ndarray:
    """Vectorised pointwise minimiser over quantile levels `ts`."""
    t = np.atleast_1d(np.asarray(ts, dtype=float))
    xi = np.asarray(problem.market.pricing_kernel(t), dtype=float)
    b_slope = None
    if multipliers.mu > 0:
        b_slope = np.asarray(problem.generator.derivative(problem.benchmark(t)), dtype=float)
    y, unbounded = _argmin(problem.utility, problem.generator, multipliers.lam, multipliers.mu, xi, b_slope, settings)
    if np.any(unbounded):
        i = int(np.flatnonzero(unbounded)[0])
        raise UnboundedArgmin(
            f"dh/dy stays negative up to y={settings.y_ceiling:g} at t={t[i]:.6g} "
            f"for lam={multipliers.lam:.6g}, mu={multipliers.mu:.6g}",
            t=float(t[i]),
        )
    return y


def pointwise_minimizer(
    problem: ProblemSpec, multipliers: Multipliers, t: float, *, settings: SolverSettings = DEFAULT_SETTINGS
) -> float:
    if not (0.0 < t < 1.0):
        raise DomainError(f"quantile level must lie in (0,1), got {t!r}")
    return float(minimize_pointwise(problem, multipliers, [t], settings=settings)[0])


# ---- problem discretised on the quadrature grid ----

class _GridProblem:
    """Problem data on one quadrature grid, with cost and divergence of candidate curves.

    The kernel used at each node is pricing_weight / dt_weight, which equals
    xi(t_i) at interior nodes and the tail-averaged kernel at the clip nodes.
    """

    def __init__(self, problem: ProblemSpec, settings: SolverSettings):
        self.problem = problem
        self.settings = settings
        self.grid: QuadratureGrid = grid_for(problem.quad, problem.benchmark)
        self.pw = problem.market.pricing_weights(self.grid)
        self.xi = self.pw / self.grid.w
        self.b = problem.benchmark.on_grid(self.grid)
        self._b_slope: Optional[np.ndarray] = None
        self.evaluations = 0
        self._memo: Tuple[Tuple[float, float], Optional[np.ndarray]] = ((math.nan, math.nan), None)

    @property
    def b_slope(self) -> np.ndarray:
        if self._b_slope is None:
            self._b_slope = np.asarray(self.problem.generator.derivative(self.b), dtype=float)
        return self._b_slope

    def curve(self, lam: float, mu: float) -> Optional[np.ndarray]:
        if self._memo[0] == (lam, mu):
            return self._memo[1]
        self.evaluations += 1
        y, unbounded = _argmin(
            self.problem.utility,
            self.problem.generator,
            lam,
            mu,
            self.xi,
            self.b_slope if mu > 0 else None,
            self.settings,
        )
        y = None if np.any(unbounded) else y
        self._memo = ((lam, mu), y)
        return y

    def cost(self, y: Optional[np.ndarray]) -> float:
        return math.inf if y is None else float(np.dot(self.pw, y))

    def divergence(self, y: Optional[np.ndarray]) -> float:
        if y is None:
            return math.inf
        return float(np.dot(self.grid.w, self.problem.generator.divergence(y, self.b)))


# ---- well-posedness ----

@dataclass(frozen=True)
class WellposednessReport:
    spd_bounded_below: bool
    strongly_convex_l2: bool
    strictly_convex_bounded: bool
    notes: Tuple[str, ...] = ()

    @property
    def cases(self) -> List[str]:
        flags = (self.spd_bounded_below, self.strongly_convex_l2, self.strictly_convex_bounded)
        return [name for name, on in zip(("i", "ii", "iii"), flags) if on]

    @property
    def ok(self) -> bool:
        return bool(self.cases)

    def to_dict(self) -> Dict[str, Any]:
        return {"cases": self.cases, "ok": self.ok, "notes": list(self.notes)}


def check_wellposedness(problem: ProblemSpec) -> WellposednessReport:
    gen, bench = problem.generator, problem.benchmark
    notes = ["(i) not applicable: a lognormal state-price density has essential infimum 0"]
    modulus = gen.strong_convexity_modulus()
    ii = modulus > 0 and bench.square_integrable
    iii = gen.is_strictly_convex() and bench.bounded
    if not ii:
        notes.append(
            f"(ii) fails: generator {gen.label} strong-convexity modulus {modulus:g}"
            + ("" if bench.square_integrable else ", benchmark not square integrable")
        )
    if not iii:
        notes.append(
            "(iii) fails: "
            + ("benchmark unbounded" if not bench.bounded else f"generator {gen.label} not strictly convex")
        )
    return WellposednessReport(False, ii, iii, tuple(notes))


# ---- closed forms ----

def merton_curve(market: MarketModel, utility: UtilitySpec, x0: float = 1.0) -> Tuple[LognormalCurve, float]:
    """Unconstrained CRRA optimum (lam*xi)^(-1/gamma) and its budget multiplier."""
    g = utility.gamma
    p = 1.0 - 1.0 / g
    log_moment = p * market.mu_phi + 0.5 * (p * market.sigma_phi) ** 2
    log_lam = g * (log_moment - math.log(x0))
    curve = LognormalCurve(mu=-(log_lam + market.mu_phi) / g, sigma=market.sigma_phi / g)
    return curve, math.exp(log_lam)


def epsilon_min(
    market: MarketModel,
    generator: BregmanGenerator,
    benchmark: QuantileCurve,
    x0: float,
    quad: Optional[QuadratureSpec] = None,
    *,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> float:
    """Smallest divergence from `benchmark` achievable within budget x0."""
    grid = grid_for(quad, benchmark)
    pw = market.pricing_weights(grid)
    b = benchmark.on_grid(grid)
    cost_b = float(np.dot(pw, b))
    if cost_b <= x0 * (1.0 + 1e-12):
        return 0.0
    if not generator.is_strictly_convex():
        raise DomainError(f"epsilon_min needs a strictly convex generator; {generator.label} is not")
    xi = pw / grid.w
    slope_b = np.asarray(generator.derivative(b), dtype=float)

    def projected(eta: float) -> np.ndarray:
        return generator.generalized_inverse(slope_b - eta * xi)

    def residual(eta: float) -> float:
        return float(np.dot(pw, projected(eta))) - x0

    res = log_bracket_root(residual, rtol=1e-14, maxiter=settings.max_iter, name="eta")
    g = projected(res.root)
    value = float(np.dot(grid.w, generator.divergence(g, b)))
    logger.debug("epsilon_min for %s: eta=%.6g, value %.6g (benchmark cost %.6g)", generator.label, res.root, value, cost_b)
    return value


# ---- multiplier search ----

def _monotone(points: List[Tuple[float, float]], scale: float) -> bool:
    finite = sorted((x, r) for x, r in points if math.isfinite(r))
    return all(r2 <= r1 + 1e-10 * scale for (_, r1), (_, r2) in zip(finite, finite[1:]))


def solve(problem: ProblemSpec, *, settings: SolverSettings = DEFAULT_SETTINGS) -> OptimalSolution:
    """Optimal quantile curve with multipliers satisfying complementary slackness."""
    report = check_wellposedness(problem)
    if not report.ok:
        raise InfeasibleError("problem is not well posed: " + "; ".join(report.notes))
    x0, eps = problem.budget, problem.epsilon
    finite_eps = math.isfinite(eps)
    eps_min = None
    if finite_eps:
        eps_min = epsilon_min(problem.market, problem.generator, problem.benchmark, x0, problem.quad, settings=settings)
        if eps <= eps_min:
            raise InfeasibleError(
                f"tolerance {eps:.6g} does not exceed the minimal attainable divergence {eps_min:.6g}; raise epsilon"
            )
    gp = _GridProblem(problem, settings)
    tol_cost = settings.rtol * x0
    tol_bw = settings.rtol * eps if finite_eps else math.inf
    diag: Dict[str, Any] = {
        "quadrature_nodes": gp.grid.size,
        "tail_mass": gp.grid.tail_mass,
        "wellposedness": report.cases,
        "epsilon_min": eps_min,
    }

    def budget_residual(lam: float, mu: float) -> float:
        return gp.cost(gp.curve(lam, mu)) - x0

    # budget only
    r1 = log_bracket_root(
        lambda lam: budget_residual(lam, 0.0), ftol=0.1 * tol_cost, maxiter=settings.max_iter, name="lambda"
    )
    lam, mu = r1.root, 0.0
    y = gp.curve(lam, mu)
    bw = gp.divergence(y)
    case = "budget_only"
    diag["iterations"] = {"lambda": r1.iterations}
    if finite_eps and bw > eps + tol_bw:
        # divergence only
        def bw_residual_free(m: float) -> float:
            return gp.divergence(gp.curve(0.0, m)) - eps

        r2 = log_bracket_root(bw_residual_free, ftol=0.1 * tol_bw, maxiter=settings.max_iter, name="mu")
        y2 = gp.curve(0.0, r2.root)
        diag["iterations"]["mu"] = r2.iterations
        if gp.cost(y2) <= x0 + tol_cost:
            lam, mu, y, case = 0.0, r2.root, y2, "bw_only"
        else:
            lam, mu, y = _solve_both(gp, x0, eps, r1.root, r2.root, settings, diag, tol_cost, tol_bw)
            case = "both"
        bw = gp.divergence(y)
    cost = gp.cost(y)
    logger.info(
        "solved %s gamma=%g: case=%s lam=%.6g mu=%.6g cost=%.8g bw=%.6g (%d grid solves)",
        problem.generator.label,
        problem.utility.gamma,
        case,
        lam,
        mu,
        cost,
        bw,
        gp.evaluations,
    )
    residuals = {"budget": cost - x0, "divergence": (bw - eps) if finite_eps else None}
    _verify_kkt(lam, mu, cost, bw, x0, eps, tol_cost, tol_bw, case)
    mult = Multipliers(lam, mu)
    curve = ClosedFormCurve(
        lambda ts, _m=mult: minimize_pointwise(problem, _m, ts, settings=settings),
        label=f"optimal[{problem.generator.label}, {problem.utility.label()}]",
        bounded=False,
        breakpoints=gp.grid.breaks,
    )
    curve.prime(gp.grid, y)
    eu = expected_utility(curve, problem.utility, grid=gp.grid)
    diag["evaluations"] = gp.evaluations
    diag["tolerances"] = {"cost": tol_cost, "divergence": None if not finite_eps else tol_bw}
    return OptimalSolution(
        curve=curve,
        multipliers=mult,
        binding_case=case,
        residuals=residuals,
        expected_utility=eu,
        cost=cost,
        divergence=bw,
        epsilon=eps,
        diagnostics=diag,
    )


def _solve_both(
    gp: _GridProblem,
    x0: float,
    eps: float,
    lam_start: float,
    mu_start: float,
    settings: SolverSettings,
    diag: Dict[str, Any],
    tol_cost: float,
    tol_bw: float,
) -> Tuple[float, float, np.ndarray]:
    """Nested search: outer mu on the divergence residual, inner lam(mu) on the budget."""
    state = {"lam": lam_start, "inner": 0}
    trace: List[Tuple[float, float]] = []
    lams: Dict[float, float] = {}

    def lam_of(mu: float) -> float:
        if mu in lams:
            return lams[mu]
        if gp.cost(gp.curve(0.0, mu)) <= x0:
            lams[mu] = 0.0
            return 0.0
        res = log_bracket_root(
            lambda lam: gp.cost(gp.curve(lam, mu)) - x0,
            start=max(state["lam"], 1e-12),
            ftol=0.1 * tol_cost,
            maxiter=settings.max_iter,
            name="lambda(mu)",
        )
        state["inner"] += res.iterations
        state["lam"] = lams[mu] = res.root
        return res.root

    def outer(mu: float) -> float:
        r = gp.divergence(gp.curve(lam_of(mu), mu)) - eps
        trace.append((mu, r))
        return r

    res = log_bracket_root(outer, start=mu_start, ftol=0.1 * tol_bw, maxiter=settings.max_outer, name="mu")
    lam = lam_of(res.root)
    y = gp.curve(lam, res.root)
    if y is None:
        raise SolverError("optimal multipliers produce an unbounded pointwise argmin", iterations=res.evaluations)
    monotone = _monotone(trace, eps)
    if not monotone:
        logger.warning("divergence residual was not monotone in mu along the search")
    diag["iterations"]["mu_outer"] = res.iterations
    diag["iterations"]["lambda_inner"] = state["inner"]
    diag["residual_monotone"] = monotone
    return lam, res.root, y


def _verify_kkt(
    lam: float, mu: float, cost: float, bw: float, x0: float, eps: float, tol_cost: float, tol_bw: float, case: str
) -> None:
    residuals = {"budget": cost - x0, "divergence": bw - eps}
    problems = []
    if cost > x0 + tol_cost:
        problems.append("budget violated")
    if math.isfinite(eps) and bw > eps + tol_bw:
        problems.append("divergence violated")
    if lam > 0 and abs(cost - x0) > tol_cost:
        problems.append("budget slackness")
    if mu > 0 and abs(bw - eps) > tol_bw:
        problems.append("divergence slackness")
    if problems:
        raise SolverError(f"KKT check failed for case {case}: {', '.join(problems)}", residuals=residuals)
