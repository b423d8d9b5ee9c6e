import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from sumax.finite_n_sim import (FiniteProcessDraw, SeriesEnvelope, best_subset_sum, k_range, partial_sum_path,
                                poissonize, sample_envelope, sample_finite_process, sup_measure,
                                truncated_max_intersection, truncated_sum_poissonized)
from sumax.renewal_chain import EntranceBatch, ReturnLaw
from sumax.subordinator_kit import IntervalSet, intersect, hits, right_cont_inverse
from sumax.tail_calculus import normalization_schedule, pure_pareto, unit_truncated_pareto
from sumax.verify import truncation_remainder_profile

PARETO = pure_pareto(1.5)
LAW = ReturnLaw(0.5)


def single_term_draw(n, weight, sign, points):
    pts = np.asarray(points, dtype=np.int64)
    env = SeriesEnvelope(np.array([1.0]), np.array([sign]))
    return FiniteProcessDraw(n, env, np.array([weight]), EntranceBatch(n, pts, np.array([0, pts.size])))


@pytest.fixture(scope="module")
def draws():
    rng = np.random.default_rng(20240611)
    return [sample_finite_process(PARETO, LAW, 200, 20, rng) for _ in range(50)]


def test_single_term_assembly():
    d = single_term_draw(5, 1.0, 1, [1])
    assert np.array_equal(d.values, [1.0, 0, 0, 0, 0])
    d = single_term_draw(5, 2.5, -1, [2, 4, 5])
    assert np.array_equal(d.values, [0, -2.5, 0, -2.5, -2.5])


def test_weights_follow_envelope(rng):
    d = sample_finite_process(PARETO, LAW, 100, 30, rng)
    w_n = LAW.wandering_rate(100)
    assert np.allclose(d.weights, (d.envelope.gammas / w_n) ** (-1 / 1.5))
    assert np.all(np.diff(d.weights) < 0)


def test_zero_weights_dropped(rng):
    # mass 1 per side: arrivals beyond 2 w_n have weight 0
    d = sample_finite_process(unit_truncated_pareto(3.0), LAW, 50, 400, rng)
    assert np.all(d.weights > 0)
    assert d.level < 400


def test_bad_arguments(rng):
    with pytest.raises(ValueError):
        sample_finite_process(PARETO, LAW, 0, 5, rng)
    with pytest.raises(ValueError):
        sample_finite_process(PARETO, LAW, 10, None, rng)


def test_two_path_equivalence(draws):
    for d in draws:
        x = np.zeros(d.n)
        for j in range(d.level):
            for k in d.entrances[j].points:
                x[k - 1] += d.signs[j] * d.weights[j]
        assert np.array_equal(x, d.values)


@pytest.fixture(scope="module")
def first_values():
    rng = np.random.default_rng(99)
    out = {}
    for n in (1000, 10_000):
        out[n] = np.array([sample_finite_process(PARETO, LAW, n, 50, rng).values[0] for _ in range(100_000)])
    return out


def test_symmetry(first_values):
    x = first_values[1000]
    # heavy tails: compare signs rather than the mean
    pos, neg = np.sum(x > 0), np.sum(x < 0)
    assert abs(pos - neg) < 3 * math.sqrt(pos + neg)
    q = np.quantile(np.abs(x[x != 0]), 0.9)
    assert abs(np.sum(x > q) - np.sum(x < -q)) < 3 * math.sqrt(np.sum(np.abs(x) > q))


@pytest.mark.parametrize("n", [1000, 10_000])
def test_marginal_tail(first_values, n):
    s = normalization_schedule(PARETO, LAW, n)
    p = np.mean(first_values[n] > 2 * s.b_n)
    se = math.sqrt(p * (1 - p) / first_values[n].size)
    assert abs(s.w_n * p - 2 ** -1.5) < 3 * s.w_n * se


def test_partial_sums(draws):
    d = draws[0]
    s = partial_sum_path(d, [0.0, 0.5, 1.0])
    assert s[0] == 0.0
    assert s[2] == pytest.approx(d.values.sum(), rel=1e-12, abs=1e-12)
    with pytest.raises(ValueError):
        partial_sum_path(d, [1.5])


@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 49))
def test_prefix_consistency(draws, t1, t2, i):
    d = draws[i]
    t1, t2 = sorted([t1, t2])
    s = partial_sum_path(d, [t1, t2])
    k1, k2 = int(math.floor(d.n * t1 + 1e-9)), int(math.floor(d.n * t2 + 1e-9))
    assert s[1] - s[0] == pytest.approx(d.values[k1:k2].sum(), abs=1e-9 * (1 + np.abs(d.values).sum()))


def test_sup_measure_examples(draws):
    d = draws[0]
    assert sup_measure(d, (0, 1)) == d.values[:d.n - 1].max()
    assert sup_measure(d, (0, 1 / (2 * d.n))) == -math.inf
    assert sup_measure(d, (0.25, 0.5)) == d.values[50:99].max()


@given(st.integers(1, 60), st.floats(0, 1), st.floats(0, 1))
def test_k_range_scan(n, a, b):
    a, b = sorted([a, b])
    lo, hi = k_range(n, (a, b))
    assert list(range(lo, hi + 1)) == [k for k in range(1, n + 1) if a < k / n < b]


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.integers(0, 49))
def test_sup_measure_monotone(draws, a, b, c, e, i):
    lo, hi = sorted([a, b])
    inner = (lo + c * (hi - lo) / 2, hi - e * (hi - lo) / 2)
    d = draws[i]
    assert sup_measure(d, inner) <= sup_measure(d, (lo, hi))


def test_sign_thinning(rng):
    N = 100_000
    first = np.empty(N)
    for i in range(N):
        env = sample_envelope(60, rng)
        first[i] = env.gammas[np.argmax(env.signs > 0)] / 2
    assert stats.kstest(first, "expon").statistic < 1.63 / math.sqrt(N)


def test_truncation_remainder_decreases(rng):
    prof = truncation_remainder_profile(PARETO, LAW, 1000, [5, 10, 20, 40], 0.8, 600, 300, rng)
    assert np.all(np.diff(prof) <= 0) and prof[0] > prof[-1]


# --------------------------------------------------------------------------
# Poissonized layer


def test_poissonized_single_term_by_hand(rng):
    n = 20
    d = single_term_draw(n, 2.0, 1, [3, 7, 8, 15])
    pd = poissonize(d, LAW, 1.5, rng)
    p = pd.tick_paths[0]
    assert np.array_equal(p.values[:4], [0, 4, 5, 12])
    assert p.values[-1] > n - 3
    for t in (0.1, 0.2, 0.5, 0.9, 1.0):
        ticks = max(int(math.floor(n * t + 1e-9)) - 3, 0)
        assert pd.sum_poissonized([t])[0] == 2.0 * right_cont_inverse(p, ticks)
    assert pd.sum_direct([1.0])[0] == 8.0


def test_before_first_entrance_is_first_arrival(rng):
    n = 50
    d = sample_finite_process(PARETO, LAW, n, 5, rng)
    pd = poissonize(d, LAW, 3.0, rng)
    t = (d.entrances.first.min() - 1) / n
    first_arrivals = np.array([p.epochs[1] for p in pd.tick_paths])
    assert pd.sum_poissonized([t])[0] == pytest.approx(np.dot(d.signed_weights, first_arrivals), rel=1e-12)


def test_poissonized_wrapper(rng):
    g = normalization_schedule(PARETO, LAW, 100).gamma_n
    s = truncated_sum_poissonized(PARETO, LAW, 100, 5, g, rng, [0.0, 0.5, 1.0])
    assert s.shape == (3,) and np.all(np.isfinite(s))


def test_coupling_gap_shrinks(rng):
    q = []
    for n in (10 ** 5, 10 ** 6):
        s = normalization_schedule(PARETO, LAW, n)
        gaps = []
        for _ in range(500):
            pd = poissonize(sample_finite_process(PARETO, LAW, n, 20, rng), LAW, s.gamma_n, rng)
            gaps.append(abs(pd.sum_direct([1.0])[0] / s.c_n - pd.sum_poissonized([1.0])[0] / s.b_n))
        q.append(np.percentile(gaps, 95))
    assert q[1] < q[0]


@pytest.mark.parametrize("B", [(0.0, 1.0), (0.2, 0.8), (0.5, 0.55)])
def test_single_term_max_exact(B, rng):
    for _ in range(200):
        d = sample_finite_process(PARETO, LAW, 100, 1, rng)
        pd = poissonize(d, LAW, 2.0, rng)
        lo, hi = k_range(100, B)
        pts = d.entrances[0].points
        hit = d.signs[0] > 0 and np.any((pts >= lo) & (pts <= hi))
        assert pd.max_intersection(B, 3) == (d.weights[0] if hit else 0.0)


def test_direct_max_full_window(rng):
    for _ in range(100):
        d = sample_finite_process(PARETO, LAW, 300, 10, rng)
        pd = poissonize(d, LAW, 2.0, rng)
        assert pd.max_direct((0, 1)) == d.values[:299].max()


def test_agreement_trend(rng):
    frac = []
    for n in (10 ** 3, 10 ** 5):
        same = [math.isclose(a, b, rel_tol=1e-12)
                for _ in range(400)
                for a, b in truncated_max_intersection(PARETO, LAW, n, 10, rng, [(0.2, 0.8)])]
        frac.append(np.mean(same))
    assert frac[1] > frac[0]


# --------------------------------------------------------------------------
# subset search


@st.composite
def subset_problems(draw):
    m = draw(st.integers(1, 6))
    sets = []
    for _ in range(m):
        pts = sorted(set(draw(st.lists(st.integers(0, 40), max_size=8))))
        pts = pts[: len(pts) // 2 * 2]
        pairs = [(pts[i] / 4, pts[i + 1] / 4) for i in range(0, len(pts), 2)]
        sets.append(IntervalSet.from_pairs(pairs) if pairs else IntervalSet.empty())
    w = sorted(draw(st.lists(st.floats(0.01, 10), min_size=m, max_size=m)), reverse=True)
    a = draw(st.integers(0, 39)) / 4
    b = a + draw(st.integers(1, 12)) / 4
    return sets, w, (a, b), draw(st.integers(1, 4))


@given(subset_problems())
def test_best_subset_matches_brute_force(problem):
    sets, w, B, cap = problem
    best = 0.0
    for size in range(1, min(cap, len(sets)) + 1):
        for S in itertools.combinations(range(len(sets)), size):
            if hits(intersect([sets[j] for j in S], B), B):
                best = max(best, sum(w[j] for j in S))
    assert best_subset_sum(sets, w, B, cap) == pytest.approx(best, rel=1e-12)
