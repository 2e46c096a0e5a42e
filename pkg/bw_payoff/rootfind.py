"""Root finding used by the pointwise minimiser and the multiplier searches.

`safeguarded_newton` works on whole arrays of independent monotone equations
(one per quadrature node). `log_bracket_root` finds the root of one monotone
scalar function of a positive parameter, expanding its bracket geometrically
and tolerating +inf/nan on the "too small" side.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import SolverError

logger = logging.getLogger(__name__)

# fn(idx, x): evaluate the equations with indices idx at points x
ArrayFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def expand_upper(
    g: ArrayFn,
    lo: np.ndarray,
    *,
    start: float = 1.0,
    ceiling: float = 1e12,
) -> Tuple[np.ndarray, np.ndarray]:
    """Double hi from `start` until g(hi) >= 0. Returns (hi, unbounded_mask).

    Nodes whose root lies below `start` keep hi = start; the mask flags nodes
    where g stays negative beyond `ceiling`.
    """
    hi = np.maximum(np.full(lo.shape, float(start)), lo * 2.0)
    pending = np.ones(lo.shape, dtype=bool)
    unbounded = np.zeros(lo.shape, dtype=bool)
    while np.any(pending):
        idx = np.flatnonzero(pending)
        gh = np.asarray(g(idx, hi[idx]), dtype=float)
        done = gh >= 0
        pending[idx[done]] = False
        rest = idx[~done]
        hi[rest] *= 2.0
        over = hi[rest] > ceiling
        unbounded[rest[over]] = True
        pending[rest[over]] = False
    return hi, unbounded


def safeguarded_newton(
    g: ArrayFn,
    dg: ArrayFn,
    lo: np.ndarray,
    hi: np.ndarray,
    *,
    x0: Optional[np.ndarray] = None,
    rtol: float = 1e-12,
    maxiter: int = 200,
) -> np.ndarray:
    """Solve g(x) = 0 elementwise for increasing g with g(lo) < 0 <= g(hi), lo > 0.

    Newton steps that leave the current bracket are replaced by a geometric
    bisection step. `g` and `dg` receive only the still-active entries and must
    take (indices, points).
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    x = np.sqrt(lo * hi) if x0 is None else np.clip(np.array(x0, dtype=float), lo, hi)
    active = np.arange(x.size)
    for _ in range(maxiter):
        if active.size == 0:
            break
        xa, la, ha = x[active], lo[active], hi[active]
        gx = np.asarray(g(active, xa), dtype=float)
        neg = gx < 0
        la = np.where(neg, xa, la)
        ha = np.where(neg, ha, xa)
        step = gx / np.asarray(dg(active, xa), dtype=float)
        xn = xa - step
        bad = ~np.isfinite(xn) | (xn <= la) | (xn >= ha)
        xn = np.where(bad, np.sqrt(la * ha), xn)
        lo[active], hi[active], x[active] = la, ha, xn
        done = (gx == 0) | (np.abs(xn - xa) <= rtol * xn) | ((ha - la) <= rtol * ha)
        x[active[gx == 0]] = xa[gx == 0]
        active = active[~done]
    if active.size:
        raise SolverError(
            f"newton: {active.size} node(s) did not reach rtol={rtol:g} within {maxiter} iterations",
            residuals={"max_bracket_width": float(np.max((hi[active] - lo[active]) / hi[active]))},
            iterations=maxiter,
        )
    return x


@dataclass
class RootResult:
    root: float
    residual: float
    iterations: int
    evaluations: int


def log_bracket_root(
    f: Callable[[float], float],
    *,
    start: float = 1.0,
    factor: float = 10.0,
    floor: float = 1e-14,
    ceiling: float = 1e14,
    rtol: float = 1e-14,
    ftol: float = 0.0,
    maxiter: int = 200,
    name: str = "multiplier",
) -> RootResult:
    """Root of a decreasing function f on (0, inf).

    f may return +inf or nan for arguments that are too small (treated as
    positive). A bracket is grown geometrically from `start`, narrowed by
    geometric bisection until both ends are finite, then handed to brentq.
    Any point with |f| <= ftol is accepted as the root. Values are memoised,
    so brentq sees exactly the bracket residuals the expansion recorded.
    """
    seen: Dict[float, float] = {}

    def val(x: float) -> float:
        if x not in seen:
            v = float(f(x))
            seen[x] = math.inf if math.isnan(v) else v
        return seen[x]

    def hit(v: float) -> bool:
        return abs(v) <= ftol

    x = float(start)
    fx = val(x)
    if hit(fx):
        return RootResult(x, fx, 0, len(seen))
    if fx > 0:
        lo, flo = x, fx
        hi, fhi = x * factor, val(x * factor)
        while fhi > 0 and not hit(fhi):
            if hi > ceiling:
                raise SolverError(
                    f"could not bracket {name}: residual stays positive up to {hi:.3g}",
                    residuals={"lower": flo, "upper": fhi},
                    iterations=len(seen),
                )
            lo, flo = hi, fhi
            hi, fhi = hi * factor, val(hi * factor)
    else:
        hi, fhi = x, fx
        lo, flo = x / factor, val(x / factor)
        while flo < 0 and not hit(flo):
            if lo < floor:
                raise SolverError(
                    f"could not bracket {name}: residual stays negative down to {lo:.3g}",
                    residuals={"lower": flo, "upper": fhi},
                    iterations=len(seen),
                )
            hi, fhi = lo, flo
            lo, flo = lo / factor, val(lo / factor)
    for end, fend in ((hi, fhi), (lo, flo)):
        if hit(fend):
            return RootResult(end, fend, 0, len(seen))
    # infinite residual at the lower end: shrink geometrically until finite
    steps = 0
    while not math.isfinite(flo):
        steps += 1
        if steps > maxiter:
            raise SolverError(
                f"could not find a finite lower bracket for {name}",
                residuals={"lower": flo, "upper": fhi},
                iterations=len(seen),
            )
        m = math.sqrt(lo * hi)
        fm = val(m)
        if hit(fm):
            return RootResult(m, fm, steps, len(seen))
        if fm < 0:
            hi, fhi = m, fm
        else:
            lo, flo = m, fm
    try:
        root, info = brentq(val, lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps), maxiter=maxiter, full_output=True)
    except (RuntimeError, ValueError) as e:
        raise SolverError(
            f"{name} search failed on [{lo:.6g}, {hi:.6g}]: {e}",
            residuals={"lower": flo, "upper": fhi},
            iterations=len(seen),
        ) from e
    res = val(root)
    logger.debug("%s root %.12g (residual %.3g, %d brentq iterations)", name, root, res, info.iterations)
    return RootResult(float(root), res, int(info.iterations), len(seen))
