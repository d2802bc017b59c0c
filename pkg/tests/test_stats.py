import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from ciflimits.errors import DomainError
from ciflimits.stats import chi2_tail, normal_cdf, normal_quantile


def test_chi2_published_critical_value():
    assert chi2_tail(3.841459, 1) == pytest.approx(0.05, abs=1e-5)


@pytest.mark.parametrize("df", [1, 2, 3, 5, 10, 50])
@pytest.mark.parametrize("x", [0.01, 0.5, 1.0, 4.0, 12.0, 80.0])
def test_chi2_against_scipy(x, df):
    assert chi2_tail(x, df) == pytest.approx(sps.chi2.sf(x, df), rel=1e-11,
                                             abs=1e-13)


@given(st.floats(min_value=0.0, max_value=200.0),
       st.integers(min_value=1, max_value=30))
def test_chi2_matches_scipy_everywhere(x, df):
    assert chi2_tail(x, df) == pytest.approx(sps.chi2.sf(x, df), rel=1e-9,
                                             abs=1e-12)


def test_chi2_at_zero_and_monotone():
    assert chi2_tail(0.0, 3) == 1.0
    xs = np.linspace(0, 30, 200)
    vals = [chi2_tail(x, 2) for x in xs]
    assert np.all(np.diff(vals) < 0)


def test_normal_quantile_value():
    assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)
    assert normal_quantile(0.5) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(min_value=1e-10, max_value=1 - 1e-10))
def test_normal_quantile_inverts_cdf(p):
    z = normal_quantile(p)
    assert normal_cdf(z) == pytest.approx(p, abs=1e-12)


@pytest.mark.parametrize("p", [1e-9, 0.001, 0.12, 0.5, 0.8, 0.999, 1 - 1e-9])
def test_normal_quantile_against_scipy(p):
    assert normal_quantile(p) == pytest.approx(sps.norm.ppf(p), abs=1e-10)


def test_domain_errors():
    with pytest.raises(DomainError):
        chi2_tail(-1.0, 1)
    with pytest.raises(DomainError):
        chi2_tail(1.0, 0)
    with pytest.raises(DomainError):
        normal_quantile(0.0)
    with pytest.raises(DomainError):
        normal_quantile(1.0)
