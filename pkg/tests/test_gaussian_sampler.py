import logging

import numpy as np
import pytest

from hurstlab.errors import MissingSeed, NotPositiveDefinite
from hurstlab.gaussian_sampler import (
    FBM_FIELD_RANGE,
    INTEGRATED_FBM_RANGE,
    SampledPath,
    SeedLineage,
    Stream,
    cholesky_factor,
    fbm_covariance,
    make_hurst_field,
    sample_fbm,
    sample_gaussian_path,
    sample_many,
    sample_mbm,
)
from hurstlab.mbm_covariance import MbmSpec


def test_same_seed_same_path():
    a = sample_fbm(0.6, 200, SeedLineage(11, 3))
    b = sample_fbm(0.6, 200, SeedLineage(11, 3))
    assert np.array_equal(a.values, b.values)


def test_streams_differ():
    base = SeedLineage(11, 3)
    draws = {s: SeedLineage(11, 3, s).generator().standard_normal(4) for s in Stream}
    assert len({tuple(v) for v in draws.values()}) == len(Stream)
    assert not np.array_equal(base.generator().standard_normal(4),
                              SeedLineage(11, 4).generator().standard_normal(4))
    assert not np.array_equal(base.child(1).generator().standard_normal(4),
                              base.child(2).generator().standard_normal(4))


def test_replication_draws_do_not_depend_on_order():
    first = [SeedLineage(5, r).generator().standard_normal(3) for r in range(4)]
    again = [SeedLineage(5, r).generator().standard_normal(3) for r in reversed(range(4))]
    for x, y in zip(first, reversed(again)):
        assert np.array_equal(x, y)


def test_sample_many_matches_single():
    spec = MbmSpec(make_hurst_field("H4"))
    n = 120
    seeds = [SeedLineage(9, r) for r in range(3)]
    from hurstlab.gaussian_sampler import mbm_factor, sample_with_factor
    f = mbm_factor(spec, n)
    many = sample_many(f, seeds)
    for s, p in zip(seeds, many):
        np.testing.assert_allclose(p.values, sample_with_factor(f, s).values, rtol=1e-12, atol=1e-14)
    assert np.allclose(sample_mbm(spec, n, seeds[0]).values, many[0].values)


def test_empirical_covariance():
    n = 16
    cov = fbm_covariance(0.3, n)
    f = cholesky_factor(cov)
    xi = SeedLineage(1).generator().standard_normal((n - 1, 40_000))
    z = f.lower @ xi
    emp = z @ z.T / xi.shape[1]
    assert np.max(np.abs(emp - cov)) < 0.03


def test_jitter_on_singular(caplog):
    v = np.array([1.0, 1.0, 1.0])
    cov = np.outer(v, v)
    with caplog.at_level(logging.WARNING):
        f = cholesky_factor(cov)
    assert f.jitter > 0
    assert "jitter" in caplog.text
    p = sample_gaussian_path(cov + 1e-3 * np.eye(3), SeedLineage(1))
    assert p.n == 4


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_factor(np.diag([1.0, -1.0]))


def test_sampled_path_validation():
    with pytest.raises(ValueError):
        SampledPath(np.zeros(5), 5)
    with pytest.raises(ValueError):
        SampledPath(np.array([0.0, np.nan]), 3)
    p = SampledPath(np.arange(4.0), 5)
    np.testing.assert_allclose(p.times, [0.2, 0.4, 0.6, 0.8])
    np.testing.assert_allclose(p.scaled(-2).values, -2 * np.arange(4.0))


def test_closed_form_fields():
    t = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(make_hurst_field("H1")(t), 0.6)
    np.testing.assert_allclose(make_hurst_field("H2")(t), 0.1 + 0.8 * t)
    np.testing.assert_allclose(make_hurst_field("h3")(t), 0.5 + 0.4 * np.sin(5 * t))
    np.testing.assert_allclose(make_hurst_field("H4")(t), 0.1 + 0.8 * (1 - t) * np.sin(10 * t) ** 2)


@pytest.mark.parametrize("kind,rng", [("integrated_fbm", INTEGRATED_FBM_RANGE), ("fbm", FBM_FIELD_RANGE)])
def test_random_fields(kind, rng):
    f = make_hurst_field(kind, seed=SeedLineage(4, 2), grid_size=800)
    assert f.kind == "sampled"
    assert f.values.min() == pytest.approx(rng[0]) and f.values.max() == pytest.approx(rng[1])
    g = make_hurst_field(kind, seed=SeedLineage(4, 2), grid_size=800)
    assert np.array_equal(f.values, g.values)
    h = make_hurst_field(kind, seed=SeedLineage(4, 3), grid_size=800)
    assert not np.array_equal(f.values, h.values)
    assert f.eta == pytest.approx(1.5 if kind == "integrated_fbm" else 0.6)


def test_integrated_field_is_smoother():
    a = make_hurst_field("integrated_fbm", seed=SeedLineage(1), grid_size=1000).values
    b = make_hurst_field("fbm", seed=SeedLineage(1), grid_size=1000).values
    rough = lambda v: np.mean(np.abs(np.diff(v, 2))) / np.ptp(v)
    assert rough(a) < rough(b) / 10


def test_missing_seed():
    with pytest.raises(MissingSeed):
        make_hurst_field("fbm")
    with pytest.raises(ValueError):
        make_hurst_field("H9")
