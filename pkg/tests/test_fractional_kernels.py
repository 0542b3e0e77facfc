import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hurstlab.errors import DomainError
from hurstlab.filters import SECOND_ORDER, dilate, make_filter
from hurstlab.fractional_kernels import (
    EPS_H,
    check_hurst,
    fbm_cross_covariance,
    fbm_filtered_asymptote,
    fbm_filtered_covariance,
    lambda2,
    lambda2_derivative,
    lambda2_dilated,
    lambda2_inverse,
    lambda_of_rho,
    rho2,
    rho2_dilated,
)


def test_check_hurst_rejects_bounds():
    for bad in (0.0, 1.0, -0.1, np.nan):
        with pytest.raises(DomainError):
            check_hurst(bad)


def test_variance_second_order():
    hs = np.linspace(0.02, 0.98, 50)
    got = np.array([fbm_filtered_covariance(SECOND_ORDER, h, 0) for h in hs])
    np.testing.assert_allclose(got, 4 - 4**hs, rtol=0, atol=1e-12)


def test_bm_second_differences():
    # BM second differences: variance 2, lag-1 covariance -1, then 0
    c = fbm_filtered_covariance(SECOND_ORDER, 0.5, np.arange(5))
    np.testing.assert_allclose(c, [2, -1, 0, 0, 0], atol=1e-14)


def test_rho2_closed_form():
    for h in (0.1, 0.3, 0.5, 0.7, 0.9):
        want = (-(3 ** (2 * h)) + 2 ** (2 * h + 2) - 7) / (8 - 2 ** (2 * h + 1))
        assert rho2(h) == pytest.approx(want, abs=1e-14)
    assert rho2(0.5) == pytest.approx(-0.5, abs=1e-15)


@pytest.mark.parametrize("i", [1, 2, 3, 5])
@pytest.mark.parametrize("h", [0.15, 0.5, 0.85])
def test_rho2_dilated_matches_covariance(i, h):
    f = dilate(SECOND_ORDER, i)
    want = fbm_cross_covariance(f, f, h, 1) / fbm_cross_covariance(f, f, h, 0)
    assert rho2_dilated(i, h) == pytest.approx(want, abs=1e-12)


def test_rho2_dilated_bm_hand_value():
    # i = 2, H = 1/2: covariances of X_k = B(k+4) - 2B(k+2) + B(k) are 4 and 1
    assert rho2_dilated(2, 0.5) == pytest.approx(0.25, abs=1e-14)


@pytest.mark.parametrize("i", [1, 2, 4])
def test_rho2_limit_branch_continuous(i):
    near = rho2_dilated(i, 1 - 2e-6)
    limit = rho2_dilated(i, 1 - 1e-7)
    assert abs(near - limit) < 1e-4


def test_lambda_closed_form():
    want = 1 / 3 + np.log(4) / (np.pi * np.sqrt(3))
    assert lambda2(0.5) == pytest.approx(want, abs=1e-12)
    assert lambda_of_rho(0.0) == pytest.approx(0.5 + np.log(2) / np.pi, abs=1e-15)


def test_lambda_rejects_boundary():
    with pytest.raises(DomainError):
        lambda_of_rho(1.0)


def test_lambda_monte_carlo():
    rng = np.random.default_rng(3)
    rho = 0.3
    x = rng.standard_normal(400_000)
    y = rho * x + np.sqrt(1 - rho**2) * rng.standard_normal(x.size)
    est = np.mean(np.abs(x + y) / (np.abs(x) + np.abs(y)))
    assert est == pytest.approx(lambda_of_rho(rho), abs=4e-3)


@pytest.mark.parametrize("i", range(1, 8))
def test_lambda_dilated_increasing(i):
    hs = np.linspace(0.001, 0.999, 400)
    vals = lambda2_dilated(i, hs)
    assert np.all(np.diff(vals) > 0)


def test_inverse_round_trip():
    hs = np.linspace(0.01, 0.99, 100)
    back = lambda2_inverse(lambda2(hs)).h
    np.testing.assert_allclose(back, hs, atol=1e-9)


def test_inverse_clamps():
    lo = lambda2_dilated(1, EPS_H)
    res = lambda2_inverse(np.array([lo / 2, 0.999]))
    np.testing.assert_array_equal(res.clamped, [True, True])
    np.testing.assert_allclose(res.h, [EPS_H, 1 - EPS_H])
    with pytest.raises(DomainError):
        lambda2_inverse(1.5)


def test_derivative_matches_finite_difference():
    h = 0.6
    d = lambda2_derivative(h)
    fd = (lambda2(h + 1e-4) - lambda2(h - 1e-4)) / 2e-4
    assert d == pytest.approx(fd, rel=1e-6)
    assert d > 0


def test_asymptote_second_order():
    # lag covariance of second differences ~ C k^{2H-4}, next term O(k^-2)
    h = 0.7
    for lag, tol in ((50, 2e-3), (200, 2e-4)):
        ratio = fbm_filtered_covariance(SECOND_ORDER, h, lag) / fbm_filtered_asymptote(SECOND_ORDER, h, lag)
        assert ratio == pytest.approx(1.0, rel=tol)


def test_asymptote_first_order():
    f = make_filter([1, -1])
    h = 0.3
    ratio = fbm_filtered_covariance(f, h, 500) / fbm_filtered_asymptote(f, h, 500)
    assert ratio == pytest.approx(1.0, rel=1e-4)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(1, 7))
def test_rho_inside_unit_interval(h, i):
    assert -1 < rho2_dilated(i, h) < 1


@settings(max_examples=60, deadline=None)
@given(st.floats(0.02, 0.98), st.integers(1, 5))
def test_inverse_dilated_round_trip(h, i):
    assert lambda2_inverse(lambda2_dilated(i, h), i).h == pytest.approx(h, abs=1e-8)
