import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rwre.dirichlet import WeightVector
from rwre.environment import EnvironmentView
from rwre.errors import DegenerateNormalizer, WrongDimension
from rwre.seeding import stream
from rwre.walks import (
    annealed_path_logprob,
    crossing_counts,
    enumerate_paths,
    estimate_velocity,
    exact_velocity_1d,
    path_directions,
    path_from_directions,
    reinforced_batch,
    run_quenched,
    run_reinforced,
    sequential_path_logprob,
    theorem1_bounds,
    theorem1_condition,
)

W31 = WeightVector((3, 1))


def test_path_round_trip():
    dirs = np.array([0, 1, 3, 2, 2, 0])
    path = path_from_directions(dirs, 2)
    assert path.shape == (7, 2)
    assert np.array_equal(path_directions(path), dirs)
    with pytest.raises(ValueError):
        path_directions([[0], [2]])


def test_crossing_counts_examples():
    assert crossing_counts([0, 1]) == {((0,), 0): 1}
    c = crossing_counts([0, 1, 0, 1])
    assert c[((0,), 0)] == 2 and c[((1,), 1)] == 1


@given(st.lists(st.integers(0, 3), max_size=30))
def test_crossing_total_equals_length(dirs):
    path = path_from_directions(dirs, 2)
    assert sum(crossing_counts(path).values()) == len(dirs)


def test_annealed_examples():
    assert annealed_path_logprob(W31, [0]) == 0.0
    assert annealed_path_logprob(W31, [0, 1]) == pytest.approx(np.log(0.75))
    # positions 0 -> 1 -> 0: site 1 is fresh, so 3/4 * 1/4
    assert np.exp(annealed_path_logprob(W31, [0, 1, 0])) == pytest.approx(0.1875)
    # directions (+, -, +): the third step reuses site 0, so 3/4 * 1/4 * 4/5
    assert np.exp(annealed_path_logprob(W31, path_from_directions([0, 1, 0], 1))) == pytest.approx(0.15)


@settings(max_examples=50)
@given(st.lists(st.floats(0.1, 6), min_size=4, max_size=4), st.lists(st.integers(0, 3), max_size=12))
def test_closed_form_matches_sequential(alphas, dirs):
    w = WeightVector(alphas)
    path = path_from_directions(dirs, 2)
    assert annealed_path_logprob(w, path) == pytest.approx(sequential_path_logprob(w, path), abs=1e-12)


@pytest.mark.parametrize("dim,steps", [(1, 6), (2, 3), (3, 2)])
def test_enumerated_law_sums_to_one(dim, steps):
    w = WeightVector(tuple(np.linspace(0.5, 2.0, 2 * dim)))
    dirs = enumerate_paths(dim, steps)
    assert len(dirs) == (2 * dim) ** steps
    total = sum(np.exp(annealed_path_logprob(w, path_from_directions(p, dim))) for p in dirs)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_reinforced_single_and_double_step():
    runs = reinforced_batch(W31, 2, 10**5, seed=4).astype(int)
    first = (runs[:, 0] == 0).mean()
    assert abs(first - 0.75) <= 3 * np.sqrt(0.75 * 0.25 / len(runs))
    both = ((runs[:, 0] == 0) & (runs[:, 1] == 1)).mean()
    assert abs(both - 0.1875) <= 3 * np.sqrt(0.1875 * 0.8125 / len(runs))
    three = reinforced_batch(W31, 3, 10**5, seed=5).astype(int)
    plus_minus_plus = np.all(three == [0, 1, 0], axis=1).mean()
    assert abs(plus_minus_plus - 0.15) <= 3 * np.sqrt(0.15 * 0.85 / len(three))


def test_reinforced_batch_matches_long_walk_kernel():
    # the short-walk and long-walk kernels implement the same law
    from scipy import stats

    w = WeightVector((1.2, 0.6, 2.0, 0.9))
    steps, n = 3, 20000
    rng = stream(8)
    long = np.array([path_directions(run_reinforced(w, steps, rng)) for _ in range(n)])
    short = reinforced_batch(w, steps, n, seed=8)
    code = lambda d: d.astype(int) @ (4 ** np.arange(steps))
    table = np.array([np.bincount(code(long), minlength=64), np.bincount(code(short), minlength=64)])
    table = table[:, table.sum(axis=0) > 0]
    assert stats.chi2_contingency(table).pvalue > 0.001


def test_reinforced_batch_independent_of_workers_and_blocks():
    w = WeightVector((1, 2, 3, 4))
    a = reinforced_batch(w, 5, 3000, seed=1, block_size=512, workers=1)
    b = reinforced_batch(w, 5, 3000, seed=1, block_size=512, workers=4)
    assert np.array_equal(a, b)


def test_reinforced_long_walk_stays_on_lattice():
    path = run_reinforced(WeightVector((1, 1, 1, 1, 1, 1)), 10**4, stream(2))
    assert path.shape == (10**4 + 1, 3)
    assert np.all(np.abs(np.diff(path, axis=0)).sum(axis=1) == 1)


def test_quenched_zero_steps_and_drift_limit():
    view = EnvironmentView(0, W31)
    assert np.array_equal(run_quenched(view, 0, stream(1)), [[0]])
    forced = EnvironmentView(0, WeightVector((1e6, 1e-6)))
    path = run_quenched(forced, 50, stream(1))
    assert np.array_equal(path[:, 0], np.arange(51))


def test_quenched_is_reproducible():
    view = EnvironmentView(5, WeightVector((1, 2, 1, 2)))
    a = run_quenched(view, 1000, stream(5, 1))
    assert np.array_equal(a, run_quenched(view, 1000, stream(5, 1)))


def test_quenched_speed_within_theorem1_box():
    # annealed law = average over environments: one fresh environment per run
    steps, runs = 10**4, 100
    v = np.array([run_quenched(EnvironmentView(r, W31), steps, stream(r, 77))[-1, 0] / steps for r in range(runs)])
    se = v.std(ddof=1) / np.sqrt(runs)
    box = theorem1_bounds(W31)[0]
    assert box.low - 3 * se <= v.mean() <= box.high + 3 * se


def test_velocity_symmetric_weights():
    est = estimate_velocity(WeightVector((2, 2, 2, 2)), 10**4, 100, seed=3)
    assert np.all(np.abs(est.mean_velocity) <= 4 * est.std_error)


def test_velocity_one_d_and_workers():
    a = estimate_velocity(W31, 10**4, 40, seed=1, workers=1)
    b = estimate_velocity(W31, 10**4, 40, seed=1, workers=3)
    assert np.array_equal(a.displacements, b.displacements)
    assert a.displacements.shape == (40, 1)


def test_theorem1_condition_examples():
    assert theorem1_condition(W31)
    assert not theorem1_condition(WeightVector((1.5, 1)))
    assert not theorem1_condition(WeightVector((2, 1)))
    assert theorem1_condition(WeightVector((1, 1, 1, 3)))


def test_theorem1_bounds_examples():
    assert theorem1_bounds(W31)[0][:2] == pytest.approx((1 / 3, 1))
    assert theorem1_bounds(WeightVector((2.5, 1)))[0][:2] == pytest.approx((0.2, 1.0))
    for iv in theorem1_bounds(WeightVector((2, 2, 2, 2))):
        assert iv[:2] == pytest.approx((-1 / 7, 1 / 7))
        assert iv.contains(0.0)
    with pytest.raises(DegenerateNormalizer):
        theorem1_bounds(WeightVector((0.4, 0.5)))


def test_exact_velocity_examples():
    assert exact_velocity_1d(W31) == pytest.approx(1 / 3)
    assert exact_velocity_1d(WeightVector((1, 3))) == pytest.approx(-1 / 3)
    assert exact_velocity_1d(WeightVector((2, 1))) == 0.0
    with pytest.raises(WrongDimension):
        exact_velocity_1d(WeightVector((1, 1, 1, 1)))
