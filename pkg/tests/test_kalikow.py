import numpy as np
import pytest
from hypothesis import given, strategies as st

from rwre.dirichlet import WeightVector
from rwre.environment import make_box, random_cluster, segment
from rwre.errors import DegenerateNormalizer, WrongDimension, WrongRegime
from rwre.kalikow import (
    _ratio,
    estimate_kalikow,
    expansion_consistency_1d,
    expansion_velocity,
    kalikow_drift,
    prop2_bounds,
    theorem1_drift_box,
)

W31 = WeightVector((3, 1))


def test_single_site_reproduces_mean_exactly():
    w = WeightVector((1.3, 0.4, 2.2, 0.9))
    k = estimate_kalikow(w, make_box((0, 0), 0), 0.7, (0, 0), 500, seed=1)
    assert np.allclose(k.values[0], w.mean, atol=1e-15, rtol=0)
    assert np.allclose(k.std_error, 0, atol=1e-15)
    drift, _ = kalikow_drift(k, (0, 0))
    assert np.allclose(drift, w.mean[:2] - w.mean[2:], atol=1e-15)


def test_segment_example_inside_prop2():
    k = estimate_kalikow(W31, segment(-2, 2), 0.9, (0,), 10**4, seed=2)
    (plus, minus) = prop2_bounds(W31)
    assert plus[:2] == pytest.approx((2 / 3, 1)) and minus[:2] == pytest.approx((0, 1 / 3))
    for x in range(len(k.domain)):
        assert plus.contains(k.values[x, 0], 3 * k.std_error[x, 0])
        assert minus.contains(k.values[x, 1], 3 * k.std_error[x, 1])
    assert k.row_sum_deviation().max() <= 1e-12


def test_low_disorder_close_to_mean():
    w = WeightVector.from_mean((0.4, 0.2, 0.2, 0.2), 200)
    k = estimate_kalikow(w, make_box((0, 0), 2), 0.9, (0, 0), 2000, seed=3)
    assert np.all(np.abs(k.values - w.mean) <= 2 * 2 / w.gamma + 3 * k.std_error)


def test_symmetric_drift_near_zero():
    w = WeightVector((2, 2, 2, 2))
    k = estimate_kalikow(w, make_box((0, 0), 1), 0.9, (0, 0), 4000, seed=4)
    # only the centre is symmetric; off-centre sites are pulled away from the boundary
    drift, se = kalikow_drift(k, (0, 0))
    assert np.all(np.abs(drift) <= 3 * se)
    edge, edge_se = kalikow_drift(k, (1, 0))
    assert edge[0] < -3 * edge_se[0]


def test_drift_inside_theorem1_box():
    k = estimate_kalikow(W31, segment(0, 4), 0.9, (2,), 4000, seed=5)
    box = theorem1_drift_box(W31).intervals[0]
    for x in range(len(k.domain)):
        assert box.contains(k.drift[x, 0], 3 * k.drift_se[x, 0])


def test_estimates_are_worker_independent():
    w = WeightVector((1.5, 0.5, 1.0, 1.2))
    dom = random_cluster(2, 12, np.random.default_rng(0))
    a = estimate_kalikow(w, dom, 0.5, (0, 0), 1500, seed=7, workers=1)
    b = estimate_kalikow(w, dom, 0.5, (0, 0), 1500, seed=7, workers=4)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.std_error, b.std_error)


def test_estimate_validation():
    with pytest.raises(ValueError):
        estimate_kalikow(W31, segment(0, 2), 1.0, (0,), 100, seed=0)
    with pytest.raises(ValueError):
        estimate_kalikow(W31, segment(0, 2), 0.5, (7,), 100, seed=0)


def test_ratio_estimator_against_brute_force():
    rng = np.random.default_rng(0)
    den = rng.uniform(1, 2, 4000)
    ctrl = rng.uniform(0, 1, 4000)
    est, se = _ratio(den * ctrl, den, ctrl, 0.5)
    # truth is E[den ctrl]/E[den] = 0.5 for independent inputs
    assert abs(est - 0.5) <= 3 * se
    assert se < ctrl.std() / np.sqrt(4000)


def test_prop2_bounds_examples():
    small = prop2_bounds(WeightVector((0.3, 0.3)))
    assert all(iv[:2] == (0.0, 1.0) and iv.vacuous for iv in small)
    for iv in prop2_bounds(WeightVector((2, 2, 2, 2))):
        assert iv[:2] == pytest.approx((1 / 7, 2 / 7)) and not iv.vacuous
    with pytest.raises(DegenerateNormalizer):
        prop2_bounds(WeightVector((0.5, 0.5)))


def test_drift_box_examples():
    b = theorem1_drift_box(W31)
    assert b.intervals[0][:2] == pytest.approx((1 / 3, 1)) and b.excludes_zero
    b = theorem1_drift_box(WeightVector((2, 2, 2, 2)))
    assert not b.excludes_zero
    b = theorem1_drift_box(WeightVector((2, 1)))
    assert b.intervals[0][:2] == pytest.approx((0, 1)) and not b.excludes_zero


def test_expansion_one_dimensional_example():
    rep = expansion_velocity(W31)
    assert rep.green_origin == pytest.approx(2.0, abs=1e-10)
    assert rep.expansion[0] == pytest.approx(1 / 3, abs=1e-10)
    assert rep.bound_ratio > 1 and not rep.precondition_ok and rep.error_bound == np.inf


def test_expansion_low_disorder_example():
    rep = expansion_velocity(WeightVector.from_mean((0.4, 0.2, 0.2, 0.2), 400))
    assert rep.precondition_ok and np.isfinite(rep.error_bound)
    assert rep.expansion[1] == 0.0
    assert rep.expansion[0] == pytest.approx(0.2 * (1 - (rep.green_origin - 1) / 399))


def test_expansion_large_gamma_limit():
    m = (0.4, 0.2, 0.2, 0.2)
    reps = [expansion_velocity(WeightVector.from_mean(m, g)) for g in (1e3, 1e4, 1e5)]
    assert np.allclose(reps[-1].expansion, (0.2, 0.0), atol=1e-4)
    bounds = [r.error_bound for r in reps]
    assert bounds[0] > bounds[1] > bounds[2] and bounds[2] < 1e-3


def test_expansion_not_ballistic():
    rep = expansion_velocity(WeightVector((2, 2, 2, 3)))
    assert not rep.theorem1 and not rep.precondition_ok


@pytest.mark.parametrize("alphas", [(3, 1), (5, 2), (10, 1), (1, 4)])
def test_expansion_consistency_examples(alphas):
    assert expansion_consistency_1d(WeightVector(alphas)) <= 1e-12


@given(st.floats(0.05, 20), st.floats(1.001, 20), st.booleans())
def test_expansion_consistency_property(minus, gap, flip):
    a = (minus + gap, minus)
    w = WeightVector(a[::-1] if flip else a)
    assert expansion_consistency_1d(w) <= 1e-12


def test_expansion_consistency_errors():
    with pytest.raises(WrongRegime):
        expansion_consistency_1d(WeightVector((2, 1.5)))
    with pytest.raises(WrongDimension):
        expansion_consistency_1d(WeightVector((3, 1, 1, 1)))
