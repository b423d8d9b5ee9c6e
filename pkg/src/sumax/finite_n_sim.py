"""Finite-n process from its series representation and the Poissonized approximants.

A draw of ``(X_1, ..., X_n)`` at truncation level ``ell`` is

    X_k = sum_{j <= ell} eps_j * tail_inverse(Gamma_j / (2 w_n)) * 1{k in E_j}

with ``Gamma_j`` unit Poisson arrivals, ``eps_j`` Rademacher signs and ``E_j``
independent entrance sets.  The Poissonized layer couples to the same entrance
sets: the renewal sums of ``E_j`` are read off by an independent Poisson clock
of intensity ``gamma_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .renewal_chain import EntranceBatch, ReturnLaw, sample_entrance_batch, sample_return
from .subordinator_kit import MonotonePath, closed_range, hits, intersect, right_cont_inverse, shift_set
from .tail_calculus import LevyTailModel, normalization_schedule, tail_inverse

# absorbs decimal-grid representation error in floor(n t)
_GRID_EPS = 1e-9


def grid_index(n: int, t):
    """``floor(n t)`` with a small tolerance for decimal grid points."""
    return np.floor(np.asarray(t, dtype=float) * n + _GRID_EPS).astype(np.int64)


def k_range(n: int, B):
    """Integers ``k`` in ``1..n`` with ``a < k/n < b``, as ``(k_lo, k_hi)`` (empty if lo > hi)."""
    a, b = B
    lo = max(1, int(math.floor(a * n)))
    while lo / n <= a:
        lo += 1
    while lo > 1 and (lo - 1) / n > a:
        lo -= 1
    hi = min(n, int(math.ceil(b * n)))
    while hi >= 1 and hi / n >= b:
        hi -= 1
    while hi < n and (hi + 1) / n < b:
        hi += 1
    return lo, hi


@dataclass(frozen=True)
class SeriesEnvelope:
    gammas: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.gammas) <= 0) or (self.gammas.size and self.gammas[0] <= 0):
            raise ValueError("arrivals must be positive and strictly increasing")
        if not np.all(np.abs(self.signs) == 1):
            raise ValueError("signs must be +-1")

    @property
    def level(self) -> int:
        return int(self.gammas.size)


def sample_envelope(level: int, rng: np.random.Generator) -> SeriesEnvelope:
    gammas = np.cumsum(rng.standard_exponential(level))
    signs = rng.choice(np.array([-1, 1]), size=level)
    return SeriesEnvelope(gammas, signs)


def sample_envelope_below(limit: float, rng: np.random.Generator) -> SeriesEnvelope:
    """All unit Poisson arrivals below ``limit`` (for finite-mass tails)."""
    count = rng.poisson(limit)
    gammas = np.sort(rng.uniform(0.0, limit, size=count))
    signs = rng.choice(np.array([-1, 1]), size=count)
    return SeriesEnvelope(gammas, signs)


@dataclass(frozen=True)
class FiniteProcessDraw:
    """One finite-n draw; only terms with positive weight are kept."""
    n: int
    envelope: SeriesEnvelope
    weights: np.ndarray
    entrances: EntranceBatch

    @property
    def level(self) -> int:
        return self.envelope.level

    @property
    def signs(self) -> np.ndarray:
        return self.envelope.signs

    @property
    def signed_weights(self) -> np.ndarray:
        return self.envelope.signs * self.weights

    @cached_property
    def values(self) -> np.ndarray:
        """Dense ``X_1..X_n`` (index ``k-1`` holds ``X_k``)."""
        e = self.entrances
        return np.bincount(e.points, weights=self.signed_weights[e.owner], minlength=self.n + 1)[1:]

    def truncated(self, ell: int) -> "FiniteProcessDraw":
        """The same draw restricted to its first ``ell`` terms."""
        ell = min(ell, self.level)
        e = self.entrances
        off = e.offsets[:ell + 1]
        env = SeriesEnvelope(self.envelope.gammas[:ell], self.envelope.signs[:ell])
        return FiniteProcessDraw(self.n, env, self.weights[:ell],
                                 EntranceBatch(e.n, e.points[:off[-1]], off))


def sample_finite_process(model: LevyTailModel, law: ReturnLaw, n: int, ell, rng: np.random.Generator) -> FiniteProcessDraw:
    """Series draw of level ``ell``; ``ell=None`` keeps every term (finite-mass tails only)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    w_n = law.wandering_rate(n)
    if ell is None:
        if math.isinf(model.total_mass):
            raise ValueError("ell=None needs a tail with finite total mass")
        env = sample_envelope_below(2.0 * w_n * model.total_mass, rng)
    else:
        if ell < 1:
            raise ValueError(f"ell must be >= 1, got {ell}")
        env = sample_envelope(ell, rng)
    weights = np.atleast_1d(tail_inverse(model, env.gammas / (2.0 * w_n))) if env.level else np.zeros(0)
    keep = weights > 0
    env = SeriesEnvelope(env.gammas[keep], env.signs[keep])
    weights = weights[keep]
    entrances = sample_entrance_batch(law, n, env.level, rng)
    return FiniteProcessDraw(n, env, weights, entrances)


def partial_sum_path(draw: FiniteProcessDraw, grid) -> np.ndarray:
    """``S_n(t) = sum_{k <= floor(n t)} X_k`` on the grid."""
    idx = grid_index(draw.n, grid)
    if np.any(idx < 0) or np.any(idx > draw.n):
        raise ValueError("grid points must lie in [0, 1]")
    csum = np.concatenate([[0.0], np.cumsum(draw.values)])
    return csum[idx]


def sup_measure(draw: FiniteProcessDraw, B) -> float:
    """``max_{k/n in B} X_k`` over the open interval ``B``; ``-inf`` if no such ``k``."""
    lo, hi = k_range(draw.n, B)
    if lo > hi:
        return -math.inf
    return float(draw.values[lo - 1:hi].max())


# --------------------------------------------------------------------------
# subset maxima over intersections of shifted ranges


def best_subset_sum(sets, weights, B, cap: int, floor: float = 0.0) -> float:
    """``max(floor, max_S sum_{j in S} weights[j])`` over ``1 <= |S| <= cap`` with
    ``intersect(sets[S])`` meeting the open interval ``B``.

    ``weights`` must be sorted in decreasing order; subsets whose best possible
    completion cannot beat the current maximum are skipped.
    """
    a, b = B
    window = (a, b)
    w = np.asarray(weights, dtype=float)
    m = w.size
    # hits of the open interval only depend on the part inside [a, b]
    clipped = [s.clip(a, b) for s in sets]
    alive = [i for i in range(m) if hits(clipped[i], window)]
    best = floor

    def bound(pos, size, cur):
        take = alive[pos:pos + cap - size]
        return cur + float(w[take].sum())

    def rec(pos, current, cur, size):
        nonlocal best
        for p in range(pos, len(alive)):
            if bound(p, size, cur) <= best:
                return
            i = alive[p]
            inter = clipped[i] if current is None else intersect([current, clipped[i]], window)
            if not hits(inter, window):
                continue
            val = cur + w[i]
            if val > best:
                best = val
            if size + 1 < cap:
                rec(p + 1, inter, val, size + 1)

    rec(0, None, 0.0, 0)
    return float(best)


# --------------------------------------------------------------------------
# Poissonized approximants


def _overshoot_return(law: ReturnLaw, m: int, rng: np.random.Generator) -> int:
    """A return conditioned to exceed ``m``: ``P(phi > k | phi > m) = ((k+1)/(m+1))**(-beta)``."""
    u = 1.0 - rng.random()
    return max(m + 1, int(math.ceil((m + 1) * u ** (-1.0 / law.beta) - 1)))


@dataclass(frozen=True)
class PoissonizedDraw:
    """Finite draw together with the coupled compound-Poisson subordinators.

    ``tick_paths[j]`` is ``n * sigma_{j,n}`` with epochs at the Poisson arrivals;
    it is simulated up to the first renewal beyond ``n``.
    """
    finite: FiniteProcessDraw
    gamma_n: float
    tick_paths: tuple

    @property
    def n(self) -> int:
        return self.finite.n

    def delays(self) -> np.ndarray:
        """``V_{j,n}`` (scaled first entrances)."""
        return self.finite.entrances.first / self.n

    def local_times(self, t: float) -> np.ndarray:
        """``L_{j,n}((t - V_{j,n})_+)`` for every term."""
        k = int(grid_index(self.n, t))
        first = self.finite.entrances.first
        return np.array([right_cont_inverse(p, max(k - int(f), 0)) for p, f in zip(self.tick_paths, first)])

    def sum_poissonized(self, grid) -> np.ndarray:
        """``S*_{n,ell}`` on the grid (unnormalized)."""
        sw = self.finite.signed_weights
        return np.array([float(np.dot(sw, self.local_times(t))) for t in np.atleast_1d(grid)])

    def sum_direct(self, grid) -> np.ndarray:
        """``S*'_{n,ell}``: the truncated series summed over ``k <= floor(n t)``."""
        return partial_sum_path(self.finite, grid)

    def ranges(self):
        """Shifted ranges ``V_{j,n} + R_{j,n}`` in tick units (integer points)."""
        first = self.finite.entrances.first
        return [shift_set(closed_range(p, 0.5), float(f)) for p, f in zip(self.tick_paths, first)]

    def max_intersection(self, B, cap: int) -> float:
        """``M*_{n,ell}(B)`` by subset enumeration over intersections, ``|S| <= cap``."""
        lo, hi = k_range(self.n, B)
        if lo > hi:
            return 0.0
        pos = np.nonzero(self.finite.signs > 0)[0]
        rngs = self.ranges()
        sets = [rngs[j].clip(1, self.n) for j in pos]
        return best_subset_sum(sets, self.finite.weights[pos], (lo - 0.5, hi + 0.5), cap)

    def max_direct(self, B) -> float:
        """``M*'_{n,ell}(B)``: direct maximum of the truncated series."""
        return sup_measure(self.finite, B)


def poissonize(draw: FiniteProcessDraw, law: ReturnLaw, gamma_n: float, rng: np.random.Generator) -> PoissonizedDraw:
    if not gamma_n > 0:
        raise ValueError("gamma_n must be positive")
    n = draw.n
    paths = []
    for j in range(draw.level):
        pts = draw.entrances[j].points
        steps = np.diff(pts).astype(float)
        over = _overshoot_return(law, n - int(pts[-1]), rng)
        ticks = np.concatenate([[0.0], np.cumsum(np.append(steps, float(over)))])
        arrivals = np.cumsum(rng.standard_exponential(ticks.size - 1) / gamma_n)
        paths.append(MonotonePath(np.concatenate([[0.0], arrivals]), ticks))
    return PoissonizedDraw(draw, gamma_n, tuple(paths))


def truncated_sum_poissonized(model: LevyTailModel, law: ReturnLaw, n: int, ell: int,
                              gamma_n: float, rng: np.random.Generator, grid) -> np.ndarray:
    """``S*_{n,ell}`` on ``grid`` for a fresh draw."""
    draw = sample_finite_process(model, law, n, ell, rng)
    return poissonize(draw, law, gamma_n, rng).sum_poissonized(grid)


def truncated_max_intersection(model: LevyTailModel, law: ReturnLaw, n: int, ell: int,
                               rng: np.random.Generator, B_list, cap=None):
    """``[(M*_{n,ell}(B), M*'_{n,ell}(B)) for B in B_list]`` for one fresh draw.

    ``cap`` defaults to ``ell_beta(beta) + 2``.
    """
    from .tail_calculus import ell_beta

    if cap is None:
        cap = ell_beta(law.beta) + 2
    sched = normalization_schedule(model, law, n)
    pd = poissonize(sample_finite_process(model, law, n, ell, rng), law, sched.gamma_n, rng)
    return [(pd.max_intersection(B, cap), pd.max_direct(B)) for B in B_list]


def truncation_remainder(model: LevyTailModel, law: ReturnLaw, n: int, levels, total: int,
                         rng: np.random.Generator) -> np.ndarray:
    """``b_n^{-1} max_k |sum_{ell < j <= total} eps_j w_j 1{k in E_j}|`` for each level.

    ``total`` stands in for the infinite series; levels must be below it.
    """
    sched = normalization_schedule(model, law, n)
    draw = sample_finite_process(model, law, n, total, rng)
    out = []
    full = draw.values
    for ell in levels:
        head = draw.truncated(ell).values if ell > 0 else np.zeros(n)
        out.append(float(np.max(np.abs(full - head))) / sched.b_n)
    return np.array(out)
