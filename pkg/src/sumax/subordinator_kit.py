"""Stable subordinators, right-continuous inverses (local times) and closed ranges.

Paths are stored as right-continuous step functions (``MonotonePath``);
ranges are finite unions of closed intervals (``IntervalSet``) in which gaps
shorter than a declared resolution are absorbed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .renewal_chain import ReturnLaw, sample_return

DEFAULT_MESH_PER_UNIT = 2 ** 14
DEFAULT_RESOLUTION = 1e-4


class HorizonExhausted(ValueError):
    """Raised when a path has to be evaluated beyond its simulated horizon."""


def _open_uniform(rng: np.random.Generator, size=None):
    # uniform on the open interval (0, 1)
    return (rng.integers(0, 2 ** 53, size=size) + 0.5) / 2.0 ** 53


# --------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class MonotonePath:
    """Non-decreasing right-continuous step path.

    ``values[i]`` is the path value on ``[epochs[i], epochs[i+1])``; the path is
    only known on ``[0, horizon]``.
    """
    epochs: np.ndarray
    values: np.ndarray
    horizon: float = field(default=None)

    def __post_init__(self):
        epochs = np.asarray(self.epochs, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if epochs.ndim != 1 or epochs.shape != values.shape or epochs.size == 0:
            raise ValueError("epochs and values must be 1-d arrays of equal, positive length")
        if epochs[0] != 0:
            raise ValueError("the first epoch must be 0")
        if np.any(np.diff(epochs) <= 0):
            raise ValueError("epochs must be strictly increasing")
        if np.any(np.diff(values) < 0):
            raise ValueError("values must be non-decreasing")
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "values", values)
        if self.horizon is None:
            object.__setattr__(self, "horizon", float(epochs[-1]))

    @property
    def origin(self) -> float:
        return float(self.values[0])

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def __call__(self, t):
        ta = np.asarray(t, dtype=float)
        if np.any(ta < 0) or np.any(ta > self.horizon):
            raise HorizonExhausted(f"time outside [0, {self.horizon}]")
        out = self.values[np.searchsorted(self.epochs, ta, side="right") - 1]
        return out if out.ndim else float(out)

    def left_limit(self, t: float) -> float:
        """``path(t-)``; equals ``path(0)`` at ``t = 0``."""
        i = np.searchsorted(self.epochs, t, side="left") - 1
        return float(self.values[max(i, 0)])


def right_cont_inverse(path: MonotonePath, x):
    """``L(x) = inf{t >= 0 : path(t) > x}`` evaluated exactly on the step path."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa >= path.final):
        raise HorizonExhausted(
            f"level {np.max(xa)} not below the final path value {path.final}; extend the path")
    out = path.epochs[np.searchsorted(path.values, xa, side="right")]
    return out if out.ndim else float(out)


def sample_positive_stable(beta: float, rng: np.random.Generator, size=None):
    """Draws of ``S_beta(1)`` with ``E exp(-lam S) = exp(-lam**beta)`` (Kanter)."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    u = _open_uniform(rng, size)
    e = rng.standard_exponential(size)
    pu = math.pi * u
    log_a = (beta * np.log(np.sin(beta * pu)) + (1 - beta) * np.log(np.sin((1 - beta) * pu))
             - np.log(np.sin(pu))) / (1 - beta)
    return np.exp((1 - beta) / beta * (log_a - np.log(e)))


def _stable_increments(beta, dt, count, rng):
    return dt ** (1.0 / beta) * sample_positive_stable(beta, rng, size=count)


def sample_subordinator_path(beta: float, horizon: float, mesh: int, rng: np.random.Generator) -> MonotonePath:
    """Stable subordinator on ``mesh`` equal steps of ``[0, horizon]``."""
    if mesh < 2:
        raise ValueError("mesh must be >= 2")
    dt = horizon / mesh
    values = np.concatenate([[0.0], np.cumsum(_stable_increments(beta, dt, mesh, rng))])
    return MonotonePath(np.arange(mesh + 1) * dt, values, horizon)


def extend_subordinator_path(path: MonotonePath, beta: float, rng: np.random.Generator) -> MonotonePath:
    """Double the horizon by appending independent increments on the same mesh."""
    mesh = path.epochs.size - 1
    dt = path.horizon / mesh
    extra = path.final + np.cumsum(_stable_increments(beta, dt, mesh, rng))
    epochs = np.arange(2 * mesh + 1) * dt
    return MonotonePath(epochs, np.concatenate([path.values, extra]), 2 * path.horizon)


def subordinator_reaching(beta: float, level: float, rng: np.random.Generator,
                          mesh_per_unit: int = DEFAULT_MESH_PER_UNIT,
                          horizon: float = 1.0) -> MonotonePath:
    """Subordinator path extended (by doubling) until its final value exceeds ``level``."""
    path = sample_subordinator_path(beta, horizon, max(2, int(round(horizon * mesh_per_unit))), rng)
    while path.final <= level:
        path = extend_subordinator_path(path, beta, rng)
    return path


def subordinator_at(beta: float, times, size: int, rng: np.random.Generator) -> np.ndarray:
    """Exact joint draws of ``sigma`` at increasing ``times``; shape ``(size, len(times))``."""
    times = np.asarray(times, dtype=float)
    dts = np.diff(np.concatenate([[0.0], times]))
    if np.any(dts < 0):
        raise ValueError("times must be non-decreasing and non-negative")
    inc = dts ** (1.0 / beta) * sample_positive_stable(beta, rng, size=(size, times.size))
    return np.cumsum(inc, axis=1)


def local_time_by_paths(beta: float, x: float, size: int, rng: np.random.Generator,
                        mesh_per_unit: int = DEFAULT_MESH_PER_UNIT, chunk: int = 4096) -> np.ndarray:
    """``L(x)`` for ``size`` independent mesh paths, simulated chunkwise.

    Equivalent to ``right_cont_inverse(subordinator_reaching(...), x)`` but only
    keeps the running value of each path in memory.
    """
    dt = 1.0 / mesh_per_unit
    out = np.empty(size)
    active = np.arange(size)
    value = np.zeros(size)
    done_steps = 0
    while active.size:
        inc = _stable_increments(beta, dt, (active.size, chunk), rng)
        path = value[active, None] + np.cumsum(inc, axis=1)
        above = path > x
        crossed = above[:, -1]
        first = np.argmax(above[crossed], axis=1)
        out[active[crossed]] = (done_steps + first + 1) * dt
        value[active] = path[:, -1]
        active = active[~crossed]
        done_steps += chunk
    return out


# --------------------------------------------------------------------------
# interval sets


@dataclass(frozen=True)
class IntervalSet:
    """Finite union of disjoint closed intervals ``[lo[i], hi[i]]``, sorted."""
    lo: np.ndarray
    hi: np.ndarray
    resolution: float = 0.0

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same length")
        if np.any(lo > hi) or np.any(hi[:-1] >= lo[1:]):
            raise ValueError("intervals must satisfy lo <= hi < next lo")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_pairs(cls, pairs, resolution: float = 0.0) -> "IntervalSet":
        arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], resolution)

    @classmethod
    def points(cls, xs, resolution: float = 0.0) -> "IntervalSet":
        xs = np.unique(np.asarray(xs, dtype=float))
        return cls(xs, xs.copy(), resolution)

    @classmethod
    def empty(cls, resolution: float = 0.0) -> "IntervalSet":
        return cls(np.zeros(0), np.zeros(0), resolution)

    def __len__(self):
        return self.lo.size

    def is_empty(self) -> bool:
        return self.lo.size == 0

    def pairs(self):
        return [(float(a), float(b)) for a, b in zip(self.lo, self.hi)]

    def measure(self) -> float:
        return float(np.sum(self.hi - self.lo))

    def clip(self, a: float, b: float) -> "IntervalSet":
        lo = np.maximum(self.lo, a)
        hi = np.minimum(self.hi, b)
        keep = lo <= hi
        return IntervalSet(lo[keep], hi[keep], self.resolution)

    def __contains__(self, x) -> bool:
        i = np.searchsorted(self.lo, x, side="right") - 1
        return bool(i >= 0 and x <= self.hi[i])


def closed_range(path: MonotonePath, resolution: float = DEFAULT_RESOLUTION) -> IntervalSet:
    """Closed range of the step path with jump gaps shorter than ``resolution`` filled.

    ``resolution=0`` keeps every positive jump as a gap (the exact range).
    """
    if resolution < 0:
        raise ValueError("resolution must be non-negative")
    v = path.values
    gaps = np.diff(v)
    brk = np.nonzero((gaps > 0) & (gaps >= resolution))[0]
    lo = np.concatenate([[v[0]], v[brk + 1]])
    hi = np.concatenate([v[brk], [v[-1]]])
    return IntervalSet(lo, hi, resolution)


def shift_set(s: IntervalSet, v: float) -> IntervalSet:
    return IntervalSet(s.lo + v, s.hi + v, s.resolution)


def intersect(sets, window) -> IntervalSet:
    """Intersection of interval sets, clipped to the closed ``window``.

    An empty list of sets gives the window itself.
    """
    a, b = window
    if not a <= b:
        raise ValueError("window must be a nonempty closed interval")
    res = max([s.resolution for s in sets], default=0.0)
    if not sets:
        return IntervalSet([a], [b], res)
    clipped = [s.clip(a, b) for s in sets]
    if any(c.is_empty() for c in clipped):
        return IntervalSet.empty(res)
    if len(clipped) == 1:
        return IntervalSet(clipped[0].lo, clipped[0].hi, res)
    coords = np.concatenate([c.lo for c in clipped] + [c.hi for c in clipped])
    nstart = sum(len(c) for c in clipped)
    kind = np.r_[np.zeros(nstart, np.int8), np.ones(coords.size - nstart, np.int8)]
    # starts sort before ends at equal coordinates so touching closed intervals meet
    order = np.lexsort((kind, coords))
    depth = np.cumsum(np.where(kind[order] == 0, 1, -1))
    at = np.nonzero(depth == len(clipped))[0]
    sc = coords[order]
    return IntervalSet(sc[at], sc[at + 1], res)


def hits(s: IntervalSet, B) -> bool:
    """Whether ``s`` meets the open interval ``B = (a, b)``."""
    a, b = B
    return bool(np.any((s.lo < b) & (s.hi > a)))


def set_distance(x: float, s: IntervalSet) -> float:
    if s.is_empty():
        raise ValueError("distance to an empty set is undefined")
    return float(np.min(np.maximum(np.maximum(s.lo - x, x - s.hi), 0.0)))


# --------------------------------------------------------------------------
# delays and the compound-Poisson approximants


def sample_delay(beta: float, rng: np.random.Generator, size=None):
    """Delay ``V`` on ``[0, 1]`` with ``P(V <= x) = x**(1 - beta)``."""
    return delay_from_uniform(beta, rng.random(size))


def delay_from_uniform(beta: float, u):
    v = np.asarray(u, dtype=float) ** (1.0 / (1.0 - beta))
    return v if v.ndim else float(v)


def poisson_tick_path(law: ReturnLaw, gamma_n: float, horizon: float, rng: np.random.Generator,
                      steps=None) -> MonotonePath:
    """``tau(N(t))`` in integer tick units (unscaled renewal sums).

    ``steps`` optionally fixes the first inter-arrival returns (coupling to an
    existing entrance set); further returns are iid.
    """
    count = rng.poisson(gamma_n * horizon)
    arrivals = np.sort(rng.uniform(0.0, horizon, size=count))
    steps = np.zeros(0, np.int64) if steps is None else np.asarray(steps, dtype=np.int64)[:count]
    if steps.size < count:
        steps = np.concatenate([steps, sample_return(law, rng, size=count - steps.size)])
    ticks = np.concatenate([[0.0], np.cumsum(steps.astype(float))])
    return MonotonePath(np.concatenate([[0.0], arrivals]), ticks, horizon)


def poissonized_subordinator(law: ReturnLaw, n: int, gamma_n: float, horizon: float,
                             rng: np.random.Generator) -> MonotonePath:
    """Compound Poisson ``sigma_{j,n}(t) = tau(N(t))`` with ``tau`` the renewal sums over ``n``."""
    if not gamma_n > 0:
        raise ValueError("gamma_n must be positive")
    p = poisson_tick_path(law, gamma_n, horizon, rng)
    return MonotonePath(p.epochs, p.values / n, horizon)


def poissonized_marginal(law: ReturnLaw, n: int, gamma_n: float, t: float, size: int,
                         rng: np.random.Generator) -> np.ndarray:
    """``size`` iid draws of ``sigma_{j,n}(t)`` without building paths."""
    counts = rng.poisson(gamma_n * t, size=size)
    total = int(counts.sum())
    steps = np.minimum(sample_return(law, rng, size=total), 2 ** 53).astype(float)
    sums = np.zeros(size)
    nz = counts > 0
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    if total:
        sums[nz] = np.add.reduceat(steps, starts[nz])
    return sums / n
