import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import trapezoid

from sddvs.errors import BinMismatch, EmptyInput, ZeroReference
from sddvs.metrics import (DensityEstimate, Stopwatch, TimingReport, density_pair,
                           l1_density_distance, mc_mean, pointwise_density, relative_mean_error)
from tests.oracles.reference import histogram_l1_independent

vals = st.floats(0.1, 10.0)


def test_single_sample_arithmetic():
    r = relative_mean_error([[1.0, 0.9]], [[1.0, 1.0]])
    assert r.epsilon == pytest.approx(0.1 / np.sqrt(2.0))
    assert relative_mean_error([[1.0, 2.0]], [[1.0, 2.0]]).epsilon == 0.0


def test_zero_reference():
    with pytest.raises(ZeroReference):
        relative_mean_error([[1.0]], [[0.0]])
    with pytest.raises(EmptyInput):
        relative_mean_error(np.zeros((0, 2)), np.zeros((0, 2)))


@given(arrays(float, (6, 3), elements=vals), arrays(float, (6, 3), elements=vals),
       st.permutations(range(6)), st.floats(0.5, 100.0))
@settings(max_examples=40, deadline=None)
def test_error_invariances(a, r, perm, scale):
    base = relative_mean_error(a, r)
    assert relative_mean_error(a[list(perm)], r[list(perm)]).epsilon == pytest.approx(base.epsilon, rel=1e-14)
    scaled = relative_mean_error(scale * a, scale * r)
    np.testing.assert_allclose(scaled.per_sample, base.per_sample, rtol=1e-15, atol=1e-15)
    assert base.epsilon == pytest.approx(base.per_sample.mean())
    assert np.all(base.per_sample >= 0)


def test_mc_mean():
    np.testing.assert_array_equal(mc_mean([np.full(3, 2.5)] * 7), np.full(3, 2.5))
    x = 1e8 + np.array([0.1, 0.2, 0.3])
    assert mc_mean(x[:, None])[0] == pytest.approx(1e8 + 0.2, rel=1e-15)
    with pytest.raises(EmptyInput):
        mc_mean([])


def test_uniform_histogram_concentration():
    v = np.random.default_rng(0).uniform(0, 1, 100_000)
    d = pointwise_density(v, bins=50, range=(0.0, 1.0))
    assert np.max(np.abs(d.masses - 0.02)) <= 0.005


@given(arrays(float, st.integers(1, 200), elements=st.floats(-1e3, 1e3)))
@settings(max_examples=40, deadline=None)
def test_masses_sum_to_one_with_clamping(v):
    d = pointwise_density(v, bins=7, range=(-1.0, 1.0))
    assert d.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert d.clamped == int(np.count_nonzero((v < -1) | (v > 1)))


def test_self_consistency_oracle(frozen):
    ref = frozen["density_self_consistency"]
    for seed, l1 in enumerate(ref["l1"]):
        assert histogram_l1_independent(seed, ref["n"], ref["bins"]) == l1
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal(ref["n"]), rng.standard_normal(ref["n"])
        da, db = density_pair(a, b, ref["bins"])
        assert l1_density_distance(da, db) == pytest.approx(l1, abs=1e-12)
        assert l1 <= 0.05


def test_l1_extremes():
    edges = np.linspace(0, 1, 3)
    a = DensityEstimate(edges, np.array([1.0, 0.0]))
    b = DensityEstimate(edges, np.array([0.0, 1.0]))
    assert l1_density_distance(a, a) == 0.0
    assert l1_density_distance(a, b) == 2.0
    with pytest.raises(BinMismatch):
        l1_density_distance(a, DensityEstimate(np.linspace(0, 2, 3), a.masses))


def test_kernel_estimate_integrates_to_one():
    v = np.random.default_rng(1).standard_normal(2000)
    d = pointwise_density(v, kernel=True, range=(-6, 6), grid_points=400)
    assert trapezoid(d.kde, d.grid) == pytest.approx(1.0, abs=1e-3)


def test_timing_report():
    t = TimingReport(offline=2.0, online=1.0, n_online=4)
    assert t.total == 3.0 and t.online_per_sample == 0.25
    w = Stopwatch()
    with w.phase("a"):
        pass
    assert w.phases["a"] >= 0.0
