from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional

from .config import ExperimentConfig, load_config, normalize_config
from .errors import BWPayoffError, ConfigError
from .experiments import TARGETS, Report, divergences, epsilon_mins, payoffs, reproduce, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


def _print(s: str) -> None:
    sys.stdout.write(s + "\n")
    sys.stdout.flush()


def _setup_logging(out_dir: Path, verbose: bool) -> None:
    logger = logging.getLogger("bw_payoff")
    logger.setLevel(logging.DEBUG)
    # Reset handlers to avoid duplicates on multiple invocations
    for h in list(logger.handlers):
        logger.removeHandler(h)
        h.close()
    logger.propagate = False
    fmt = logging.Formatter(_FORMAT)
    sh = logging.StreamHandler(sys.stderr)
    sh.setLevel(logging.DEBUG if verbose else logging.INFO)
    sh.setFormatter(fmt)
    logger.addHandler(sh)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(out_dir / "run.log", encoding="utf-8")
    except OSError as e:
        logger.warning("cannot open %s/run.log: %s", out_dir, e)
        return
    fh.setLevel(logging.DEBUG)
    fh.setFormatter(fmt)
    logger.addHandler(fh)


def _config(args: argparse.Namespace) -> ExperimentConfig:
    raw = load_config(args.config) if args.config else {}
    return normalize_config(raw, out_dir=args.out, panels=args.quad_panels, grid_points=args.grid)


def _finish(report: Report, args: argparse.Namespace) -> int:
    report.write()
    if getattr(args, "plot", False):
        from .plotting import render_dir

        for p in render_dir(report.out_dir):
            report.add_file(p)
        report.write()
    _print(report.text())
    _print(f"[out] {report.out_dir}")
    return EXIT_SOLVER if report.failures else EXIT_OK


def _guard(fn: Callable[[argparse.Namespace], int]) -> Callable[[argparse.Namespace], int]:
    def wrapped(args: argparse.Namespace) -> int:
        log = logging.getLogger("bw_payoff.cli")
        try:
            return fn(args)
        except ConfigError as e:
            log.error("config error: %s", e)
            _print(f"[error] config: {e}")
            return EXIT_CONFIG
        except BWPayoffError as e:
            log.error("%s: %s", type(e).__name__, e)
            _print(f"[error] {type(e).__name__}: {e}")
            return EXIT_SOLVER

    return wrapped


def _out_dir(args: argparse.Namespace) -> Path:
    if args.out:
        return Path(args.out)
    if args.config:
        try:
            raw = load_config(args.config)
            d = (raw.get("output") or {}).get("dir") if isinstance(raw.get("output"), dict) else None
            if d:
                return Path(d)
        except ConfigError:
            pass
    return Path("out")


@_guard
def cmd_divergence(args: argparse.Namespace) -> int:
    return _finish(divergences(_config(args)), args)


@_guard
def cmd_epsilon_min(args: argparse.Namespace) -> int:
    return _finish(epsilon_mins(_config(args)), args)


@_guard
def cmd_solve(args: argparse.Namespace) -> int:
    return _finish(run(_config(args)), args)


@_guard
def cmd_payoff(args: argparse.Namespace) -> int:
    return _finish(payoffs(_config(args)), args)


@_guard
def cmd_reproduce(args: argparse.Namespace) -> int:
    report = reproduce(args.target, _out_dir(args), panels=args.quad_panels, grid_points=args.grid)
    return _finish(report, args)


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        "bw-payoff",
        description="Optimal payoffs under budget and Bregman-Wasserstein constraints",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", default=None, help="JSON or YAML experiment config")
        sp.add_argument("--out", default=None, help="Output directory (overrides output.dir)")
        sp.add_argument("--quad-panels", dest="quad_panels", type=int, default=None, help="Gauss-Legendre panel count")
        sp.add_argument("--grid", type=int, default=None, help="Points in emitted quantile CSVs")
        sp.add_argument("--plot", action="store_true", help="Render PNGs from the CSVs (needs matplotlib)")
        sp.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")

    sp = sub.add_parser("divergence", help="BW divergences of the acceptable strategies per generator")
    common(sp)
    sp.set_defaults(func=cmd_divergence)

    sp = sub.add_parser("epsilon-min", help="Smallest attainable divergence within the budget")
    common(sp)
    sp.set_defaults(func=cmd_epsilon_min)

    sp = sub.add_parser("solve", help="Solve every (gamma, generator) pair of the config")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("payoff", help="Payoff-versus-stock curves of benchmark and strategies")
    common(sp)
    sp.set_defaults(func=cmd_payoff)

    sp = sub.add_parser("reproduce", help="Reproduce a published table or figure set")
    sp.add_argument("target", choices=list(TARGETS))
    common(sp)
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    _setup_logging(_out_dir(args), args.verbose)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
