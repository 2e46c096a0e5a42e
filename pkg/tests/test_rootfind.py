import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from bw_payoff.errors import SolverError
from bw_payoff.rootfind import expand_upper, log_bracket_root, safeguarded_newton


def test_log_bracket_root_both_directions():
    assert log_bracket_root(lambda x: 1.0 / x - 2.0).root == pytest.approx(0.5, rel=1e-12)
    assert log_bracket_root(lambda x: 1.0 / x - 1e-6).root == pytest.approx(1e6, rel=1e-12)


def test_log_bracket_root_skips_infinite_side():
    def f(x):
        return math.inf if x < 1e-3 else 0.01 / x - 1.0

    assert log_bracket_root(f, start=1e-5).root == pytest.approx(0.01, rel=1e-12)


def test_log_bracket_root_reports_failure():
    with pytest.raises(SolverError) as exc:
        log_bracket_root(lambda x: 1.0, name="lambda")
    assert "lambda" in str(exc.value)
    assert "upper" in exc.value.residuals


def test_expand_upper_flags_unbounded():
    targets = np.array([0.5, 40.0, np.inf])

    def g(idx, x):
        return x - targets[idx]

    hi, unbounded = expand_upper(g, np.full(3, 1e-12), ceiling=1e6)
    assert list(unbounded) == [False, False, True]
    assert hi[0] == 1.0
    assert hi[1] == 64.0


def test_safeguarded_newton_vector():
    c = np.array([0.5, 2.0, 10.0, 1e-3])

    # increasing in y with root y = 1/c
    def g(idx, y):
        return -1.0 / y + c[idx]

    def dg(idx, y):
        return 1.0 / (y * y)

    lo = np.full(4, 1e-12)
    hi, _ = expand_upper(g, lo)
    y = safeguarded_newton(g, dg, lo, hi)
    np.testing.assert_allclose(y, 1.0 / c, rtol=1e-10)


def test_safeguarded_newton_reports_iteration_cap():
    c = np.array([0.5, 2.0])

    def g(idx, y):
        return -1.0 / y + c[idx]

    def dg(idx, y):
        return 1.0 / (y * y)

    with pytest.raises(SolverError) as exc:
        safeguarded_newton(g, dg, np.full(2, 1e-12), np.full(2, 1e12), maxiter=1)
    assert exc.value.iterations == 1


def test_log_bracket_root_is_stable_under_evaluation_noise():
    calls = {"n": 0}

    # residual at the start point flips sign between calls
    def f(x):
        calls["n"] += 1
        noise = 1e-15 if calls["n"] % 2 else -1e-15
        return 1.0 / x - 1.0 + noise

    res = log_bracket_root(f, start=1.0)
    assert res.root == pytest.approx(1.0, rel=1e-12)


def test_log_bracket_root_accepts_residual_within_ftol():
    res = log_bracket_root(lambda x: 1.0 / x - 1.0 + 3e-13, start=1.0, ftol=1e-12)
    assert res.root == 1.0
    assert res.iterations == 0
