import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from bw_payoff.errors import DomainError
from bw_payoff.preferences import UtilitySpec


def test_log_branch_values():
    u = UtilitySpec(1.0)
    assert u.is_log
    assert u.utility(1.0) == 0.0
    assert u.marginal(1.0) == 1.0
    assert u.inverse_marginal(2.0) == pytest.approx(0.5, rel=1e-15)


def test_power_branch_values():
    u = UtilitySpec(1.5)
    assert not u.is_log
    assert u.marginal(4.0) == pytest.approx(0.125, rel=1e-14)
    assert u.inverse_marginal(0.125) == pytest.approx(4.0, rel=1e-14)
    # (x^(1-g) - 1)/(1-g) at x=4: (0.5 - 1)/(-0.5) = 1
    assert u.utility(4.0) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5, 3.0])
def test_inverse_marginal_round_trip(gamma):
    u = UtilitySpec(gamma)
    y = np.logspace(-6, 6, 200)
    np.testing.assert_allclose(u.marginal(u.inverse_marginal(y)), y, rtol=1e-12)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5])
def test_marginal_matches_finite_difference(gamma):
    u = UtilitySpec(gamma)
    for x in (0.01, 0.3, 1.0, 7.0, 100.0):
        h = 1e-5 * x
        fd = (u.utility(x + h) - u.utility(x - h)) / (2 * h)
        assert fd == pytest.approx(u.marginal(x), rel=1e-6)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5])
def test_inada_and_concavity(gamma):
    u = UtilitySpec(gamma)
    assert u.marginal(1e-8) > 1e3
    assert u.marginal(1e8) < 1e-3
    x = np.linspace(0.1, 10.0, 101)
    assert np.all(np.diff(u.marginal(x)) < 0)
    assert np.all(u.curvature(x) > 0)


def test_domain_errors():
    with pytest.raises(DomainError):
        UtilitySpec(0.0)
    with pytest.raises(DomainError):
        UtilitySpec(-1.0)
    u = UtilitySpec(1.0)
    with pytest.raises(DomainError):
        u.utility(0.0)
    with pytest.raises(DomainError):
        u.marginal(-1.0)
    with pytest.raises(DomainError):
        u.inverse_marginal(0.0)
