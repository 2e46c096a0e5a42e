"""Experiment orchestration: config-driven runs and the reproduction targets.

Every entry point returns a `Report` that knows how to write `summary.json`
and `summary.txt`; CSV curves are written as the items complete. Solver
failures are isolated per item and counted in `Report.failures`.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .bregman import BregmanGenerator, make_generator
from .config import ExperimentConfig, normalize_config
from .errors import BWPayoffError, ConfigError
from .market import MarketModel, stock_grid
from .optimizer import ProblemSpec, epsilon_min, merton_curve, solve
from .outputs import curve_to_csv, format_table, payoff_to_csv, write_json, write_text
from .preferences import UtilitySpec
from .quantile import QuadratureSpec, QuantileCurve, crossing_probability
from .strategies import StrategySpec, divergence_row, strategy_name, strategy_quantile

logger = logging.getLogger(__name__)

UPPER_BOUND_LEVEL = 1.0 - 1e-6

TARGETS = (
    "table1",
    "table2",
    "table3",
    "example1-figs",
    "example2-figs",
    "acceptable-figs",
    "regularization-figs",
)


def plain_generators() -> List[BregmanGenerator]:
    return [make_generator("quadratic"), make_generator("entropic")]


def thresholded_generators(alphas: Sequence[float] = (1.0, 0.95), theta: Optional[float] = None) -> List[BregmanGenerator]:
    return [make_generator("thresholded", base, alpha, theta) for alpha in alphas for base in ("quadratic", "entropic")]


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", text).strip("_")


@dataclass
class Report:
    name: str
    out_dir: Path
    rows: List[Dict[str, Any]] = field(default_factory=list)
    tables: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)
    failures: int = 0
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 3 if self.failures else 0

    def add_table(self, key: str, header: List[str], rows: List[List[Any]]) -> None:
        self.tables[key] = {"header": header, "rows": rows}

    def add_file(self, path: Path) -> None:
        self.files.append(str(Path(path).relative_to(self.out_dir)))

    def text(self) -> str:
        parts = [f"== {self.name} =="]
        for key, tab in self.tables.items():
            parts.append(f"\n[{key}]")
            parts.append(format_table(tab["header"], tab["rows"]))
        if self.rows:
            keys = ["label", "generator", "gamma", "epsilon", "lambda", "mu", "binding_case",
                    "expected_utility", "upper_bound", "crossing_probability", "status"]
            shown = [k for k in keys if any(k in r for r in self.rows)]
            parts.append("\n[solutions]")
            parts.append(format_table(shown, [[r.get(k) for k in shown] for r in self.rows]))
        if self.failures:
            parts.append(f"\n{self.failures} item(s) failed; see run.log")
        return "\n".join(parts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "tables": self.tables,
            "rows": self.rows,
            "files": sorted(self.files),
            "failures": self.failures,
            "meta": self.meta,
        }

    def write(self) -> None:
        write_json(self.out_dir / "summary.json", self.to_dict())
        write_text(self.out_dir / "summary.txt", self.text())


def _prepare(out_dir: Path) -> Path:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"output directory {out_dir} is not writable: {e}") from e
    return out_dir


# ---- building blocks ----

def divergence_table(
    report: Report,
    key: str,
    strategies: Sequence[StrategySpec],
    benchmark: QuantileCurve,
    generators: Sequence[BregmanGenerator],
    quad: Optional[QuadratureSpec],
) -> Dict[str, float]:
    """One row per generator: divergence of every strategy and the chosen tolerance (row max)."""
    header = ["generator"] + [strategy_name(s) for s in strategies] + ["epsilon"]
    rows: List[List[Any]] = []
    chosen: Dict[str, float] = {}
    for gen in generators:
        try:
            vals = divergence_row(strategies, benchmark, gen, quad)
        except BWPayoffError as e:
            logger.error("divergences for %s failed: %s", gen.label, e)
            report.failures += 1
            rows.append([gen.label] + [None] * (len(strategies) + 1))
            continue
        eps = max(vals)
        chosen[gen.label] = eps
        rows.append([gen.label] + vals + [eps])
        logger.info("%s %s: %s", key, gen.label, " ".join(f"{v:.6f}" for v in vals))
    report.add_table(key, header, rows)
    return chosen


def solve_item(
    report: Report,
    *,
    label: str,
    market: MarketModel,
    utility: UtilitySpec,
    generator: BregmanGenerator,
    benchmark: QuantileCurve,
    budget: float,
    epsilon: float,
    quad: QuadratureSpec,
    points: int,
    s_grid: np.ndarray,
    subdir: str = "curves",
) -> Optional[Dict[str, Any]]:
    """Solve one problem, dump its quantile and payoff curves, append a summary row."""
    row: Dict[str, Any] = {
        "label": label,
        "generator": generator.label,
        "gamma": utility.gamma,
        "epsilon": None if math.isinf(epsilon) else epsilon,
    }
    try:
        problem = ProblemSpec(market, utility, generator, benchmark, budget, epsilon, quad)
        sol = solve(problem)
        stem = report.out_dir / subdir / slug(label)
        report.add_file(curve_to_csv(sol.curve, f"{stem}_quantile.csv", points))
        report.add_file(payoff_to_csv(sol.curve, market, f"{stem}_payoff.csv", s_grid))
        row.update(
            {
                "lambda": sol.multipliers.lam,
                "mu": sol.multipliers.mu,
                "binding_case": sol.binding_case,
                "expected_utility": sol.expected_utility,
                "cost": sol.cost,
                "divergence": sol.divergence,
                "residuals": sol.residuals,
                "upper_bound": float(sol.curve(UPPER_BOUND_LEVEL)),
                "crossing_probability": crossing_probability(sol.curve, benchmark),
                "diagnostics": sol.diagnostics,
                "status": "ok",
            }
        )
    except (BWPayoffError, ArithmeticError, ValueError, RuntimeError) as e:
        logger.error("%s failed: %s: %s", label, type(e).__name__, e)
        if not isinstance(e, BWPayoffError):
            logger.debug("unexpected failure in %s", label, exc_info=True)
        report.failures += 1
        row.update({"status": "error", "error": f"{type(e).__name__}: {e}"})
    report.rows.append(row)
    return row


def _curve_files(report: Report, stem: str, curve: QuantileCurve, market: MarketModel, points: int, s_grid: np.ndarray) -> None:
    report.add_file(curve_to_csv(curve, report.out_dir / f"{stem}_quantile.csv", points))
    report.add_file(payoff_to_csv(curve, market, report.out_dir / f"{stem}_payoff.csv", s_grid))


# ---- config-driven commands ----

def divergences(cfg: ExperimentConfig) -> Report:
    report = Report("divergence", _prepare(cfg.out_dir))
    if not cfg.strategies:
        raise ConfigError("no acceptable strategies configured")
    divergence_table(report, "divergences", cfg.strategies, cfg.benchmark, cfg.generators, cfg.quad)
    return report


def epsilon_mins(cfg: ExperimentConfig) -> Report:
    report = Report("epsilon-min", _prepare(cfg.out_dir))
    rows = []
    for gen in cfg.generators:
        try:
            rows.append([gen.label, epsilon_min(cfg.market, gen, cfg.benchmark, cfg.budget, cfg.quad)])
        except BWPayoffError as e:
            logger.error("epsilon_min for %s failed: %s", gen.label, e)
            report.failures += 1
            rows.append([gen.label, None])
    report.add_table("epsilon_min", ["generator", "epsilon_min"], rows)
    return report


def payoffs(cfg: ExperimentConfig) -> Report:
    report = Report("payoff", _prepare(cfg.out_dir))
    s_grid = stock_grid(*cfg.stock_grid)
    _curve_files(report, "payoff/benchmark", cfg.benchmark, cfg.market, cfg.quantile_points, s_grid)
    for s in cfg.strategies:
        _curve_files(report, f"payoff/{slug(strategy_name(s))}", strategy_quantile(s), cfg.market, cfg.quantile_points, s_grid)
    return report


def run(cfg: ExperimentConfig) -> Report:
    """Solve every (gamma, generator) pair of the config."""
    report = Report("solve", _prepare(cfg.out_dir))
    report.meta["config"] = cfg.describe()
    s_grid = stock_grid(*cfg.stock_grid)
    chosen: Dict[str, float] = {}
    if cfg.strategies:
        chosen = divergence_table(report, "divergences", cfg.strategies, cfg.benchmark, cfg.generators, cfg.quad)
    _curve_files(report, "curves/benchmark", cfg.benchmark, cfg.market, cfg.quantile_points, s_grid)
    for utility in cfg.utilities:
        for gen in cfg.generators:
            if cfg.tolerance_mode == "infinite":
                eps = math.inf
            elif cfg.tolerance_mode == "explicit":
                eps = cfg.epsilon
            elif gen.label in chosen:
                eps = chosen[gen.label]
            else:
                report.failures += 1
                report.rows.append({"label": gen.label, "generator": gen.label, "gamma": utility.gamma,
                                    "status": "error", "error": "no tolerance (divergence selection failed)"})
                continue
            solve_item(
                report,
                label=f"{gen.label}_gamma{utility.gamma:g}",
                market=cfg.market,
                utility=utility,
                generator=gen,
                benchmark=cfg.benchmark,
                budget=cfg.budget,
                epsilon=eps,
                quad=cfg.quad,
                points=cfg.quantile_points,
                s_grid=s_grid,
            )
    return report


# ---- reproduction targets ----

def _preset_config(preset: str, out_dir: Path, **overrides: Any) -> ExperimentConfig:
    return normalize_config({"strategies": preset}, out_dir=out_dir, **overrides)


def reproduce_table(name: str, out_dir: Path, *, panels: Optional[int] = None, grid_points: Optional[int] = None) -> Report:
    preset, gens = {
        "table1": ("example1", plain_generators()),
        "table2": ("example1", thresholded_generators()),
        "table3": ("example2", plain_generators() + thresholded_generators()),
    }[name]
    cfg = _preset_config(preset, out_dir / name, panels=panels, grid_points=grid_points)
    report = Report(name, _prepare(cfg.out_dir))
    report.meta["preset"] = preset
    divergence_table(report, name, cfg.strategies, cfg.benchmark, gens, cfg.quad)
    return report


def _solve_grid(
    report: Report,
    cfg: ExperimentConfig,
    generators: Sequence[BregmanGenerator],
    gammas: Sequence[float],
    *,
    key: str,
    suffix: str = "",
) -> None:
    chosen = divergence_table(report, key, cfg.strategies, cfg.benchmark, generators, cfg.quad)
    s_grid = stock_grid(*cfg.stock_grid)
    for gamma in gammas:
        for gen in generators:
            if gen.label not in chosen:
                continue
            solve_item(
                report,
                label=f"{gen.label}{suffix}_gamma{gamma:g}",
                market=cfg.market,
                utility=UtilitySpec(gamma),
                generator=gen,
                benchmark=cfg.benchmark,
                budget=cfg.budget,
                epsilon=chosen[gen.label],
                quad=cfg.quad,
                points=cfg.quantile_points,
                s_grid=s_grid,
            )


def _merton_files(report: Report, cfg: ExperimentConfig, gammas: Sequence[float]) -> None:
    s_grid = stock_grid(*cfg.stock_grid)
    for gamma in gammas:
        curve, lam = merton_curve(cfg.market, UtilitySpec(gamma), cfg.budget)
        _curve_files(report, f"curves/unconstrained_gamma{gamma:g}", curve, cfg.market, cfg.quantile_points, s_grid)
        report.rows.append(
            {
                "label": f"unconstrained_gamma{gamma:g}",
                "generator": "-",
                "gamma": gamma,
                "lambda": lam,
                "mu": 0.0,
                "binding_case": "budget_only",
                "upper_bound": float(curve(UPPER_BOUND_LEVEL)),
                "crossing_probability": crossing_probability(curve, cfg.benchmark),
                "status": "ok",
            }
        )


def reproduce_example1(out_dir: Path, **overrides: Any) -> Report:
    cfg = _preset_config("example1", out_dir / "example1-figs", **overrides)
    report = Report("example1-figs", _prepare(cfg.out_dir))
    _curve_files(report, "curves/benchmark", cfg.benchmark, cfg.market, cfg.quantile_points, stock_grid(*cfg.stock_grid))
    _merton_files(report, cfg, (1.0, 1.5))
    _solve_grid(report, cfg, plain_generators(), (1.0,), key="plain")
    _solve_grid(report, cfg, thresholded_generators(), (1.0,), key="thresholded")
    return report


def reproduce_example2(out_dir: Path, **overrides: Any) -> Report:
    cfg = _preset_config("example2", out_dir / "example2-figs", **overrides)
    report = Report("example2-figs", _prepare(cfg.out_dir))
    _curve_files(report, "curves/benchmark", cfg.benchmark, cfg.market, cfg.quantile_points, stock_grid(*cfg.stock_grid))
    _merton_files(report, cfg, (1.0,))
    _solve_grid(report, cfg, plain_generators() + thresholded_generators(), (1.0,), key="divergences")
    return report


def reproduce_acceptable(out_dir: Path, **overrides: Any) -> Report:
    report = Report("acceptable-figs", _prepare(out_dir / "acceptable-figs"))
    for preset in ("example1", "example2"):
        cfg = _preset_config(preset, report.out_dir, **overrides)
        s_grid = stock_grid(*cfg.stock_grid)
        _curve_files(report, f"{preset}/benchmark", cfg.benchmark, cfg.market, cfg.quantile_points, s_grid)
        for s in cfg.strategies:
            _curve_files(report, f"{preset}/{slug(strategy_name(s))}", strategy_quantile(s), cfg.market, cfg.quantile_points, s_grid)
    return report


def reproduce_regularization(out_dir: Path, thetas: Sequence[float] = (1e-4, 1e-6, 1e-8), **overrides: Any) -> Report:
    cfg = _preset_config("example1", out_dir / "regularization-figs", **overrides)
    report = Report("regularization-figs", _prepare(cfg.out_dir))
    for theta in thetas:
        gens = thresholded_generators((1.0,), theta)
        _solve_grid(report, cfg, gens, (1.0,), key=f"theta={theta:g}", suffix=f"_theta{theta:g}")
    return report


def reproduce(target: str, out_dir: Path | str, *, panels: Optional[int] = None, grid_points: Optional[int] = None) -> Report:
    out = Path(out_dir)
    if target not in TARGETS:
        raise ConfigError(f"unknown reproduce target {target!r}; expected one of {TARGETS}")
    if target.startswith("table"):
        return reproduce_table(target, out, panels=panels, grid_points=grid_points)
    handlers: Dict[str, Callable[..., Report]] = {
        "example1-figs": reproduce_example1,
        "example2-figs": reproduce_example2,
        "acceptable-figs": reproduce_acceptable,
        "regularization-figs": reproduce_regularization,
    }
    return handlers[target](out, panels=panels, grid_points=grid_points)
