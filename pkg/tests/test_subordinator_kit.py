import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from sumax.renewal_chain import ReturnLaw
from sumax.subordinator_kit import (HorizonExhausted, IntervalSet, MonotonePath, closed_range, delay_from_uniform,
                                    extend_subordinator_path, hits, intersect, local_time_by_paths,
                                    poissonized_marginal, poissonized_subordinator, right_cont_inverse,
                                    sample_delay, sample_positive_stable, sample_subordinator_path, set_distance,
                                    shift_set, subordinator_at, subordinator_reaching)
from sumax.tail_calculus import gamma_fn, normalization_schedule, unit_truncated_pareto
from sumax.verify import ks_critical, non_increasing_within_noise


@st.composite
def step_paths(draw):
    k = draw(st.integers(1, 30))
    dt = draw(st.lists(st.floats(0.01, 2.0), min_size=k, max_size=k))
    jumps = draw(st.lists(st.one_of(st.just(0.0), st.floats(0.001, 3.0)), min_size=k, max_size=k))
    origin = draw(st.floats(0.0, 1.0))
    epochs = np.concatenate([[0.0], np.cumsum(dt)])
    values = origin + np.concatenate([[0.0], np.cumsum(jumps)])
    values[-1] += 1.0  # keep the final value strictly above the rest
    return MonotonePath(epochs, values)


# --------------------------------------------------------------------------
# stable draws and paths


def test_kanter_positive_and_moment(rng):
    s = sample_positive_stable(0.5, rng, size=1_000_000)
    assert np.all(s > 0)
    v = s ** -0.5
    assert abs(v.mean() - 1 / gamma_fn(1.5)) < 3 * v.std() / math.sqrt(v.size)


@pytest.mark.parametrize("beta", [0.2, 0.5, 0.9])
def test_kanter_laplace(beta, rng):
    e = np.exp(-sample_positive_stable(beta, rng, size=400_000))
    assert abs(e.mean() - math.exp(-1)) < 3 * e.std() / math.sqrt(e.size)


def test_path_starts_at_zero(rng):
    p = sample_subordinator_path(0.6, 2.0, 64, rng)
    assert p(0.0) == 0.0 and p.origin == 0.0
    assert p.horizon == 2.0


def test_self_similarity(rng):
    beta, N = 0.6, 100_000
    one = np.empty(N)
    two = np.empty(N)
    for i in range(N):
        p = sample_subordinator_path(beta, 2.0, 2, rng)
        two[i] = p(2.0)
    for i in range(N):
        one[i] = sample_subordinator_path(beta, 1.0, 2, rng)(1.0)
    assert stats.ks_2samp(one, two / 2 ** (1 / beta)).statistic < 0.006


def test_path_laplace(rng):
    x = subordinator_at(0.7, [0.5], 400_000, rng)[:, 0]
    e = np.exp(-x)
    assert abs(e.mean() - math.exp(-0.5)) < 3 * e.std() / math.sqrt(e.size)


def test_extension_keeps_prefix(rng):
    p = sample_subordinator_path(0.5, 1.0, 16, rng)
    q = extend_subordinator_path(p, 0.5, rng)
    assert q.horizon == 2.0
    assert np.array_equal(q.values[:17], p.values)
    r = subordinator_reaching(0.5, 50.0, rng, mesh_per_unit=64)
    assert r.final > 50.0


def test_mesh_bad():
    with pytest.raises(ValueError):
        sample_subordinator_path(0.5, 1.0, 1, np.random.default_rng(0))


# --------------------------------------------------------------------------
# inverses


def test_inverse_hand_example():
    p = MonotonePath([0.0, 1.0, 2.0], [1.0, 3.0, 5.0])
    assert right_cont_inverse(p, 0.0) == 0.0
    assert right_cont_inverse(p, 2.0) == 1.0
    assert right_cont_inverse(p, 1.0) == 1.0
    with pytest.raises(HorizonExhausted):
        right_cont_inverse(p, 5.0)


@given(step_paths(), st.floats(0, 1), st.floats(0, 1))
def test_inverse_monotone_right_continuous(path, u1, u2):
    lo, hi = sorted([u1, u2])
    x1 = path.origin + lo * (path.final - path.origin) * 0.999
    x2 = path.origin + hi * (path.final - path.origin) * 0.999
    L1, L2 = right_cont_inverse(path, x1), right_cont_inverse(path, x2)
    assert L1 <= L2
    # right-continuity on a step path: the inverse is constant just above x
    assert right_cont_inverse(path, x1 + 1e-12 * max(1.0, x1)) == L1 or np.any(
        (path.values > x1) & (path.values <= x1 + 1e-12 * max(1.0, x1)))


@given(step_paths())
def test_inverse_of_path_values(path):
    for t, v in zip(path.epochs, path.values):
        if v < path.final:
            assert right_cont_inverse(path, v) >= t


@given(step_paths(), st.floats(0, 1))
def test_inverse_range_duality(path, u):
    # x is in the exact range iff the path jumps over x from exactly x
    x = path.origin + u * (path.final - path.origin) * 0.999
    rng_set = closed_range(path, 0.0)
    xs = [x] + [float(v) for v in path.values[:-1]]
    for y in xs:
        L = right_cont_inverse(path, y)
        assert (y in rng_set) == (path.left_limit(L) == y)


# --------------------------------------------------------------------------
# ranges and interval sets


def test_closed_range_single_jump():
    t = np.linspace(0, 1, 101)
    p = MonotonePath(np.append(t, 1.5), np.append(t, 3.0))
    assert closed_range(p, 0.1).pairs() == [(0.0, 1.0), (3.0, 3.0)]


def test_closed_range_fine_steps_single_interval():
    t = np.linspace(0, 1, 1001)
    p = MonotonePath(t, t)
    assert closed_range(p, 0.01).pairs() == [(0.0, 1.0)]


def test_range_measure_shrinks_with_resolution(rng):
    p = subordinator_reaching(0.5, 1.0, rng, mesh_per_unit=2 ** 16)
    m = [closed_range(p, 10.0 ** -k).clip(0, 1).measure() for k in (2, 3, 4, 5)]
    assert all(a > b for a, b in zip(m, m[1:]))


def test_interval_examples():
    a = IntervalSet.from_pairs([(0, 1), (2, 3)])
    b = IntervalSet.from_pairs([(0.5, 2.5)])
    assert intersect([a, b], (0, 3)).pairs() == [(0.5, 1.0), (2.0, 2.5)]
    assert not hits(IntervalSet.from_pairs([(0, 1)]), (1, 2))
    assert hits(IntervalSet.from_pairs([(0, 1)]), (0.99, 2))
    assert set_distance(1.5, a) == 0.5
    assert set_distance(0.5, a) == 0.0
    with pytest.raises(ValueError):
        set_distance(0.0, IntervalSet.empty())
    assert intersect([], (0.2, 0.4)).pairs() == [(0.2, 0.4)]
    assert shift_set(a, 1.0).pairs() == [(1.0, 2.0), (3.0, 4.0)]


def test_invalid_sets():
    with pytest.raises(ValueError):
        IntervalSet.from_pairs([(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        IntervalSet.from_pairs([(1, 0)])


@st.composite
def interval_sets(draw):
    pts = sorted(set(draw(st.lists(st.integers(0, 60), min_size=0, max_size=12))))
    pts = pts[: len(pts) // 2 * 2]
    pairs = [(pts[i] / 4, pts[i + 1] / 4) for i in range(0, len(pts), 2)]
    # merge touching pairs by construction: distinct integers keep hi < next lo
    return IntervalSet.from_pairs(pairs) if pairs else IntervalSet.empty()


@given(st.lists(interval_sets(), min_size=1, max_size=4), st.floats(0, 15), st.floats(0, 15))
def test_intersect_pointwise(sets, a, b):
    lo, hi = sorted([a, b])
    out = intersect(sets, (lo, hi))
    for x in np.linspace(lo, hi, 37):
        assert (x in out) == all(x in s for s in sets)


# --------------------------------------------------------------------------
# delays and compound-Poisson paths


def test_delay_examples(rng):
    assert delay_from_uniform(0.5, 0.5) == 0.25
    v = sample_delay(0.5, rng, size=1_000_000)
    assert np.mean(v <= 0.25) == pytest.approx(0.5, abs=3 * 0.5 / 1000)
    assert stats.kstest(v, lambda x: np.clip(x, 0, 1) ** 0.5).statistic < 0.002


def test_poissonized_empty(rng):
    p = poissonized_subordinator(ReturnLaw(0.5), 100, 1e-12, 1.0, rng)
    assert p.final == 0.0 and p(1.0) == 0.0


def test_poisson_intensity(rng):
    law = ReturnLaw(0.5)
    counts = np.array([poissonized_subordinator(law, 100, 7.5, 1.0, rng).epochs.size - 1 for _ in range(4000)])
    assert abs(counts.mean() - 7.5) < 3 * math.sqrt(7.5 / counts.size)


def test_poissonized_converges(rng):
    beta = 0.5
    law = ReturnLaw(beta)
    ref = subordinator_at(beta, [1.0], 10_000, rng)[:, 0]
    ks = []
    for n in (10 ** 3, 10 ** 4, 10 ** 5):
        g = normalization_schedule(unit_truncated_pareto(3.0), law, n).gamma_n
        ks.append(stats.ks_2samp(poissonized_marginal(law, n, g, 1.0, 10_000, rng), ref).statistic)
    noise = ks_critical(10_000, 10_000)
    assert non_increasing_within_noise(ks, [noise] * 3)
    assert ks[-1] < noise


# --------------------------------------------------------------------------
# deterministic inverse and range convergence


@given(st.floats(0.2, 3.0), st.floats(0.1, 0.9), st.floats(0.0, 0.5))
def test_inverse_and_distance_converge(slope, jump_at, jump):
    def f(t):
        return slope * t + jump * (t >= jump_at)

    def f_inv(x):
        a = f(jump_at) - jump
        if x < a:
            return x / slope
        if x < a + jump:
            return jump_at
        return (x - jump) / slope

    xs = np.linspace(0, min(1.0, 0.99 * f(4.0)), 401)
    prev_inv, prev_rho = math.inf, math.inf
    for n in (10, 100, 1000):
        t = np.arange(0, 4 * n + 1) / n
        t = np.union1d(t, [jump_at])
        path = MonotonePath(t, f(t))
        gap = 1.0 / n * slope  # uniform distance between the step path and f
        inv = max(abs(right_cont_inverse(path, x) - f_inv(x)) for x in xs)
        F = closed_range(MonotonePath(np.linspace(0, 4, 40001), f(np.linspace(0, 4, 40001))), 1e-3)
        Fn = closed_range(path, 0.0)
        rho = max(abs(set_distance(x + 1.0 / n, Fn) - set_distance(x, F)) for x in xs)
        assert inv <= 10 * max(gap, 1.0 / n) and rho <= 10 * max(gap, 1.0 / n) + 1e-3
        assert inv <= prev_inv + 1e-12 and rho <= prev_rho + 1e-3
        prev_inv, prev_rho = inv, rho


def test_local_time_by_paths_matches_single_paths(rng):
    beta = 0.6
    a = local_time_by_paths(beta, 0.7, 3000, rng, mesh_per_unit=2 ** 10)
    b = np.array([right_cont_inverse(subordinator_reaching(beta, 0.7, rng, 2 ** 10), 0.7) for _ in range(3000)])
    assert stats.ks_2samp(a, b).pvalue > 0.001
