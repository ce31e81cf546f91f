import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from sterile_cp.stats import EstimateCI, linfit, wilson


@given(st.integers(1, 5000), st.data())
def test_wilson_contains_estimate(n, data):
    k = data.draw(st.integers(0, n))
    e = EstimateCI.proportion(k, n, 0)
    assert 0 <= e.ci95[0] <= e.value <= e.ci95[1] <= 1
    assert e.stderr >= 0


def test_wilson_against_statsmodels_formula():
    # Wilson score interval, computed directly
    k, n, z = 37, 120, sps.norm.ppf(0.975)
    p = k / n
    c = (p + z * z / (2 * n)) / (1 + z * z / n)
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    assert wilson(k, n) == pytest.approx((c - h, c + h), rel=1e-12)


def test_extreme_proportions_have_nondegenerate_intervals():
    assert EstimateCI.proportion(0, 100, 0).ci95[1] > 0
    assert EstimateCI.proportion(100, 100, 0).ci95[0] < 1


def test_mean_and_linfit():
    e = EstimateCI.mean([1.0, 2.0, 3.0], 0)
    assert e.value == 2.0 and e.stderr == pytest.approx(1 / math.sqrt(3))
    slope, icept, _, r2 = linfit(np.arange(5.0), 2 * np.arange(5.0) + 1)
    assert slope == pytest.approx(2) and icept == pytest.approx(1) and r2 == pytest.approx(1)
    with pytest.raises(ValueError):
        EstimateCI(0.5, 0.1, (0.6, 0.7), 1, 0)
