"""Flat-file outputs: CSV curves, JSON summaries, aligned text tables."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np

from .market import MarketModel, payoff_curve
from .quantile import QuantileCurve, curve_table


def fmt(x: Any) -> str:
    """Fixed 10-significant-digit rendering used in every CSV."""
    return f"{float(x):.10g}"


def write_csv(path: Path | str, header: Sequence[str], columns: Sequence[Iterable[float]]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(list(c) if not isinstance(c, np.ndarray) else c, dtype=float) for c in columns]
    with p.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(header))
        for row in zip(*cols):
            w.writerow([fmt(v) for v in row])
    return p


def read_csv(path: Path | str) -> Dict[str, np.ndarray]:
    with Path(path).open("r", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.empty((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def curve_to_csv(curve: QuantileCurve, path: Path | str, points: int = 1000) -> Path:
    t, v = curve_table(curve, points)
    return write_csv(path, ["t", "value"], [t, v])


def payoff_to_csv(
    curve: QuantileCurve, market: MarketModel, path: Path | str, grid: Optional[np.ndarray] = None
) -> Path:
    s, x = payoff_curve(curve, market, grid)
    return write_csv(path, ["s", "payoff"], [s, x])


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path | str, obj: Any) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(_jsonable(obj), ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p


def format_table(header: Sequence[str], rows: Sequence[Sequence[Any]], *, decimals: int = 6) -> str:
    def cell(v: Any) -> str:
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.{decimals}f}" if math.isfinite(v) else "-"
        return "-" if v is None else str(v)

    body = [[cell(v) for v in r] for r in rows]
    widths = [max(len(str(h)), *(len(r[i]) for r in body)) if body else len(str(h)) for i, h in enumerate(header)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(lines)


def write_text(path: Path | str, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text.rstrip("\n") + "\n", encoding="utf-8")
    return p

