import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2, ncx2

from oracles import marcum_q_quad, ncx2_cdf_quad
from smtree.special import marcum_q, ncx2_cdf_even


@pytest.mark.parametrize("m", [1, 3, 17])
@pytest.mark.parametrize("a", [0.0, 0.5, 12.0])
def test_zero_threshold(m, a):
    assert marcum_q(m, a, 0.0) == 1.0


@pytest.mark.parametrize("b", [0.1, 1.0, 2.5, 6.0])
def test_central_first_order(b):
    assert marcum_q(1, 0.0, b) == pytest.approx(math.exp(-b * b / 2), rel=1e-13)


def test_q1_at_one_one():
    assert abs(marcum_q(1, 1.0, 1.0) - marcum_q_quad(1, 1.0, 1.0)) < 1e-8


def test_broadcasting_and_errors():
    out = marcum_q(2, np.array([0.0, 1.0, 2.0]), 1.0)
    assert out.shape == (3,)
    with pytest.raises(ValueError):
        marcum_q(0, 1.0, 1.0)
    with pytest.raises(ValueError):
        marcum_q(1.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        marcum_q(1, -1.0, 1.0)


def test_large_noncentrality_is_finite():
    # a^2 / 2 around 2e4: weights must not underflow
    assert marcum_q(4, 200.0, 150.0) == pytest.approx(1.0, abs=1e-12)
    assert marcum_q(4, 200.0, 250.0) == pytest.approx(0.0, abs=1e-12)
    assert 0.3 < marcum_q(4, 200.0, 200.0) < 0.7


def test_quadrature_oracle_grid():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(120):
        m = int(rng.integers(1, 33))
        a, b = rng.uniform(0, 30, size=2)
        worst = max(worst, abs(marcum_q(m, a, b) - marcum_q_quad(m, a, b)))
    assert worst < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_ncx2_identity(seed):
    rng = np.random.default_rng(seed)
    for _ in range(40):
        i = int(rng.integers(1, 17))
        gamma2 = float(rng.uniform(0, 20))
        sigma2 = float(rng.uniform(0.05, 3))
        R = float(rng.uniform(0.01, 30))
        sigma = math.sqrt(sigma2)
        ours = 1.0 - marcum_q(i, math.sqrt(2 * gamma2) / sigma, math.sqrt(2 * R) / sigma)
        nc = 2 * gamma2 / sigma2
        ref = ncx2.cdf(2 * R / sigma2, 2 * i, nc) if nc > 0 else chi2.cdf(2 * R / sigma2, 2 * i)
        assert abs(ours - ref) < 1e-10


def test_ncx2_cdf_even_against_density_quadrature():
    for x, m, nc in [(3.0, 1, 2.0), (40.0, 8, 25.0), (0.5, 2, 0.3), (100.0, 30, 60.0)]:
        assert abs(ncx2_cdf_even(x, m, nc) - ncx2_cdf_quad(x, 2 * m, nc)) < 1e-8


@settings(max_examples=200, deadline=None)
@given(
    m=st.integers(1, 32),
    a=st.floats(0, 30),
    b1=st.floats(0, 30),
    b2=st.floats(0, 30),
)
def test_monotone_in_b_and_bounded(m, a, b1, b2):
    lo, hi = sorted((b1, b2))
    q_lo, q_hi = marcum_q(m, a, lo), marcum_q(m, a, hi)
    assert 0.0 <= q_hi <= 1.0 and 0.0 <= q_lo <= 1.0
    assert q_hi <= q_lo + 1e-12


@settings(max_examples=200, deadline=None)
@given(m=st.integers(1, 32), a1=st.floats(0, 30), a2=st.floats(0, 30), b=st.floats(0, 30))
def test_monotone_in_a(m, a1, a2, b):
    lo, hi = sorted((a1, a2))
    assert marcum_q(m, lo, b) <= marcum_q(m, hi, b) + 1e-12
