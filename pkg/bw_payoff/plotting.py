"""Optional PNG rendering of emitted CSV curves (needs matplotlib)."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List

from .outputs import read_csv

logger = logging.getLogger(__name__)


def available() -> bool:
    try:
        import matplotlib  # type: ignore  # noqa: F401
    except ImportError:
        return False
    return True


def _group(out_dir: Path, suffix: str) -> Dict[Path, List[Path]]:
    groups: Dict[Path, List[Path]] = {}
    for p in sorted(out_dir.rglob(f"*_{suffix}.csv")):
        groups.setdefault(p.parent, []).append(p)
    return groups


def render_dir(out_dir: Path | str) -> List[Path]:
    """One figure per directory and curve type; every CSV in the directory is a line."""
    out = Path(out_dir)
    if not available():
        logger.warning("matplotlib not installed; skipping plots (pip install bw-payoff[plot])")
        return []
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written: List[Path] = []
    for suffix, xlabel, ylabel in (("quantile", "t", "quantile"), ("payoff", "S_T", "payoff")):
        for folder, files in _group(out, suffix).items():
            fig, ax = plt.subplots(figsize=(7, 4.5))
            for f in files:
                data = read_csv(f)
                xs, ys = list(data.values())[:2]
                ax.plot(xs, ys, label=f.stem[: -len(suffix) - 1])
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            ax.grid(alpha=0.3)
            ax.legend(fontsize=7)
            target = folder / f"{suffix}.png"
            fig.tight_layout()
            fig.savefig(target, dpi=120)
            plt.close(fig)
            written.append(target)
            logger.debug("wrote %s", target)
    return written
