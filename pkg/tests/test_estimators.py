import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hurstlab.errors import DegenerateVariations, EmptyNeighborhood
from hurstlab.estimators import (
    EstimatorConfig,
    estimate,
    estimate_ir,
    estimate_ir2,
    estimate_many,
    estimate_qv,
    estimate_qv2,
    gls_fit,
    gls_mean,
    ir_statistic,
    neighborhood,
    qv_log_vector,
    qv_slope,
)
from hurstlab.filters import SECOND_ORDER, dilate, make_filter
from hurstlab.fractional_kernels import EPS_H, lambda2
from hurstlab.gaussian_sampler import SampledPath, SeedLineage, sample_fbm


def test_neighborhood_examples():
    k = neighborhood(100, 0.5, 0.5, 2)
    assert (k[0], k[-1], k.size) == (40, 60, 21)
    k = neighborhood(100, 0.5, 0.005, 2)
    assert (k[0], k[-1], k.size) == (1, 10, 10)
    n, a = 6000, 0.3
    base = int(np.floor(2 * n ** (1 - a)))
    for t in np.linspace(0.2, 0.8, 25):
        assert neighborhood(n, a, t, 2).size in (base, base + 1)


def test_neighborhood_errors():
    with pytest.raises(EmptyNeighborhood):
        neighborhood(20, 0.9, 0.99, 2)
    with pytest.raises(ValueError):
        neighborhood(100, 0.5, 1.0, 2)


def test_ir_statistic_trivial():
    up = np.cumsum(np.cumsum(np.ones(30)))  # second differences all equal to 1
    assert ir_statistic(up, SECOND_ORDER, np.arange(1, 20)) == pytest.approx(1.0)
    alt = np.cumsum(np.cumsum((-1.0) ** np.arange(30)))
    assert ir_statistic(alt, SECOND_ORDER, np.arange(1, 20)) == pytest.approx(0.0)
    assert ir_statistic(np.zeros(30), SECOND_ORDER, np.arange(1, 20)) == 1.0
    with pytest.raises(EmptyNeighborhood):
        ir_statistic(up, SECOND_ORDER, [])


def test_qv_log_vector_quadratic():
    n = 200
    z = (np.arange(1, n) / n) ** 2
    cfg = EstimatorConfig(0.5, 4, "QV")
    tv = qv_log_vector(z, cfg, neighborhood(n, 0.5, 0.5, 2))
    i = np.arange(1, 5)
    np.testing.assert_allclose(tv, np.log((2 * i**2 / n**2) ** 2), rtol=1e-9)


def test_qv_log_vector_constant():
    with pytest.raises(DegenerateVariations):
        qv_log_vector(np.ones(100), EstimatorConfig(0.5, 3, "QV"), np.arange(1, 50))


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(1.2)
    with pytest.raises(ValueError):
        EstimatorConfig(0.3, 1, "QV")
    with pytest.raises(ValueError):
        EstimatorConfig(0.3, 2, "IR", make_filter([1, -1]))
    assert EstimatorConfig(0.3, 1, "ir").estimator == "IR"


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-20, 20), st.integers(2, 8))
def test_qv_exact_regression(h0, c, p):
    tv = 2 * h0 * np.log(np.arange(1, p + 1)) + c
    assert qv_slope(tv) == pytest.approx(h0, abs=1e-12)


def test_qv_two_point_closed_form():
    # A = (-log 2 / 2, log 2 / 2), so half the slope is (T2 - T1) / (2 log 2)
    tv = np.array([0.3, 1.7])
    assert qv_slope(tv) == pytest.approx((tv[1] - tv[0]) / (2 * np.log(2)), abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-10, 10), st.integers(2, 6), st.integers(0, 1000))
def test_gls_reproduces_exact_line(h0, c, p, seed):
    n = 3000
    z = np.log(np.arange(1, p + 1) / n)
    tv = 2 * h0 * z + c
    a = np.random.default_rng(seed).standard_normal((p, p))
    gamma = a @ a.T + p * np.eye(p)
    two_h, icpt = gls_fit(tv, gamma, n)
    assert two_h == pytest.approx(2 * h0, abs=1e-9)
    assert icpt == pytest.approx(c, abs=1e-8)


def test_gls_identity_is_ols():
    rng = np.random.default_rng(1)
    tv = rng.standard_normal(5)
    assert gls_fit(tv, np.eye(5), 100) == pytest.approx(gls_fit(tv, None, 100))
    z = np.vstack([np.log(np.arange(1, 6) / 100), np.ones(5)]).T
    ols = np.linalg.lstsq(z, tv, rcond=None)[0]
    assert gls_fit(tv, None, 100) == pytest.approx(tuple(ols))
    # the slope is the centered-log regression used by QV
    assert 0.5 * gls_fit(tv, None, 100)[0] == pytest.approx(qv_slope(tv))


def test_gls_mean():
    x = np.array([0.2, 0.4, 0.9])
    assert gls_mean(x, np.eye(3)) == pytest.approx(x.mean())
    assert gls_mean(np.full(3, 0.37), np.diag([1.0, 5.0, 0.2])) == pytest.approx(0.37)


@pytest.fixture(scope="module")
def fbm_path():
    return sample_fbm(0.6, 2000, SeedLineage(42))


TS = np.linspace(0.1, 0.9, 17)


@pytest.mark.parametrize("est", ["IR", "IR2"])
def test_ir_scale_and_sign_invariance(fbm_path, table, est):
    cfg = EstimatorConfig(0.3, 5, est)
    base = estimate(fbm_path, cfg, TS, table).h_hat
    for c in (5.0, -1.0, -0.01):
        assert np.array_equal(estimate(fbm_path.scaled(c), cfg, TS, table).h_hat, base)


@pytest.mark.parametrize("est", ["QV", "QV2"])
def test_qv_scale_invariance(fbm_path, table, est):
    cfg = EstimatorConfig(0.3, 5, est)
    base = estimate(fbm_path, cfg, TS, table).h_hat
    for c in (5.0, -3.0, 1e-3):
        assert np.max(np.abs(estimate(fbm_path.scaled(c), cfg, TS, table).h_hat - base)) < 1e-12


def test_precomputed_matches_direct(fbm_path):
    cfg = EstimatorConfig(0.3, 5, "QV")
    n = fbm_path.n
    curve = estimate_qv(fbm_path, cfg, TS)
    for t, h in zip(TS, curve.h_hat):
        tv = qv_log_vector(fbm_path, cfg, neighborhood(n, 0.3, t, 2))
        assert h == pytest.approx(qv_slope(tv), abs=1e-10)
    ir = estimate_ir(fbm_path, EstimatorConfig(0.3, 1, "IR"), TS)
    for t, h in zip(TS, ir.h_hat):
        k = neighborhood(n, 0.3, t, 2)
        k = k[k <= n - 4]
        s = ir_statistic(fbm_path, SECOND_ORDER, k)
        assert lambda2(h) == pytest.approx(s, abs=1e-9)


def test_ir2_identity_weights_is_average(fbm_path, table):
    from hurstlab.asymptotic_constants import AsymptoticTable
    eye = np.broadcast_to(np.eye(5), table.sigma_p.shape).copy()
    flat = AsymptoticTable(table.h_grid, 5, eye, table.gamma)
    cfg = EstimatorConfig(0.3, 5, "IR2")
    got = estimate_ir2(fbm_path, cfg, TS, flat).h_hat
    singles = []
    from hurstlab.fractional_kernels import lambda2_inverse
    n = fbm_path.n
    for t in TS:
        hs = []
        for i in range(1, 6):
            k = neighborhood(n, 0.3, t, 2)
            k = k[k <= n - 2 - 2 * i]
            hs.append(lambda2_inverse(ir_statistic(fbm_path, dilate(SECOND_ORDER, i), k), i).h)
        singles.append(np.mean(hs))
    np.testing.assert_allclose(got, singles, atol=1e-9)


def test_qv2_identity_gamma_is_ols(fbm_path, table):
    from hurstlab.asymptotic_constants import AsymptoticTable
    eye = np.broadcast_to(np.eye(5), table.gamma.shape).copy()
    flat = AsymptoticTable(table.h_grid, 5, table.sigma_p, eye)
    cfg = EstimatorConfig(0.3, 5, "QV2")
    got = estimate_qv2(fbm_path, cfg, TS, flat)
    ols = estimate_qv(fbm_path, EstimatorConfig(0.3, 5, "QV"), TS)
    np.testing.assert_allclose(got.h_hat, ols.h_hat, atol=1e-12)
    assert np.all(np.isfinite(got.intercept))


def test_qv2_without_table_uses_series(fbm_path, table):
    cfg = EstimatorConfig(0.3, 5, "QV2")
    a = estimate_qv2(fbm_path, cfg, TS[:4], table).h_hat
    b = estimate_qv2(fbm_path, cfg, TS[:4]).h_hat
    np.testing.assert_allclose(a, b, atol=5e-3)


def test_ir2_requires_table(fbm_path):
    with pytest.raises(ValueError):
        estimate(fbm_path, EstimatorConfig(0.3, 5, "IR2"), TS)


def test_singular_weights_fall_back(fbm_path, table):
    from hurstlab.asymptotic_constants import AsymptoticTable
    bad = AsymptoticTable(table.h_grid, 5, np.ones_like(table.sigma_p), np.ones_like(table.gamma))
    ir2 = estimate(fbm_path, EstimatorConfig(0.3, 5, "IR2"), TS, bad)
    assert ir2.fallback_flags.all() and np.all(np.isfinite(ir2.h_hat))
    qv2 = estimate(fbm_path, EstimatorConfig(0.3, 5, "QV2"), TS, bad)
    ols = estimate(fbm_path, EstimatorConfig(0.3, 5, "QV"), TS)
    assert qv2.fallback_flags.all()
    np.testing.assert_allclose(qv2.h_hat, ols.h_hat, atol=1e-12)


def test_edge_targets_marked_invalid():
    path = sample_fbm(0.5, 64, SeedLineage(1))
    curve = estimate(path, EstimatorConfig(0.9, 1, "IR"), np.array([0.5, 0.999]))
    assert curve.valid.tolist() == [True, False]
    assert np.isnan(curve.h_hat[1])


def test_estimate_many_matches_single(fbm_path, table):
    cfgs = [EstimatorConfig(0.3, 5, e) for e in ("IR", "QV", "IR2", "QV2")]
    many = estimate_many(fbm_path, cfgs, TS, table)
    for c, m in zip(cfgs, many):
        np.testing.assert_array_equal(m.h_hat, estimate(fbm_path, c, TS, table).h_hat)


def test_clamping_flags():
    # a strictly alternating path drives the IR statistic to 0, below the invertible range
    z = np.cumsum(np.cumsum((-1.0) ** np.arange(199)))
    path = SampledPath(z, 200)
    curve = estimate_ir(path, EstimatorConfig(0.5, 1, "IR"), np.array([0.5]))
    assert curve.clamp_flags[0] and curve.h_hat[0] == EPS_H
    # a quadratic path has variations growing like i^2, i.e. QV slope 2, clamped at 1 - EPS_H
    q = SampledPath((np.arange(1, 200) / 200.0) ** 2, 200)
    curve = estimate_qv(q, EstimatorConfig(0.5, 3, "QV"), np.array([0.5]))
    assert curve.clamp_flags[0] and curve.h_hat[0] == 1 - EPS_H
    fb = sample_fbm(0.5, 500, SeedLineage(3))
    curve = estimate_qv(fb, EstimatorConfig(0.4, 3, "QV"), np.linspace(0.2, 0.8, 7))
    assert not curve.clamp_flags.any()


def test_fbm_statistic_mean():
    n, reps = 2000, 60
    s = []
    for r in range(reps):
        p = sample_fbm(0.6, n, SeedLineage(8, r))
        s.append(ir_statistic(p, SECOND_ORDER, neighborhood(n, 0.3, 0.5, 2)))
    s = np.array(s)
    assert abs(s.mean() - lambda2(0.6)) < 3 * s.std(ddof=1) / np.sqrt(reps)


def test_qv_slope_on_bm():
    n, reps = 4096, 20
    slopes = []
    for r in range(reps):
        p = sample_fbm(0.5, n, SeedLineage(9, r))
        tv = qv_log_vector(p, EstimatorConfig(0.2, 5, "QV"), np.arange(1, n - 2))
        slopes.append(2 * qv_slope(tv))
    assert abs(np.mean(slopes) - 1.0) < 0.1


def test_ir_qv_agree_on_fbm():
    n, reps = 6000, 100
    ir, qv = [], []
    for r in range(reps):
        p = sample_fbm(0.6, n, SeedLineage(10, r))
        ir.append(estimate_ir(p, EstimatorConfig(0.3, 1, "IR"), [0.5]).h_hat[0])
        qv.append(estimate_qv(p, EstimatorConfig(0.3, 5, "QV"), [0.5]).h_hat[0])
    assert abs(np.mean(ir) - np.mean(qv)) < 0.03
    assert abs(np.mean(ir) - 0.6) < 0.05
