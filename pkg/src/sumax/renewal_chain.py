"""Return-time law of the null-recurrent chain and its entrance-time process.

Only the law of the first return time ``phi`` to the reference state enters the
model (``f = 1_A``), so trajectories are realized directly as delayed renewal
sequences on ``{1, ..., n}``: the first entrance has law proportional to the
return tail, later entrances add iid returns.

The shipped law has ``P(phi > k) = (k + 1)**(-beta)``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

# returns are clipped here so integer cumsums never overflow int64
_RETURN_CAP = 2 ** 62


@functools.lru_cache(maxsize=32)
def _tail_prefix(beta: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    prefix = np.cumsum((k + 1.0) ** (-beta))
    prefix.flags.writeable = False
    return prefix


@dataclass(frozen=True)
class ReturnLaw:
    beta: float

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")

    def tail(self, k):
        """``P(phi > k)`` for integer ``k >= 0``."""
        ka = np.asarray(k, dtype=float)
        out = (ka + 1.0) ** (-self.beta)
        return out if out.ndim else float(out)

    def pmf(self, k):
        """``P(phi = k) = tail(k-1) - tail(k)`` for ``k >= 1`` (zero below)."""
        ka = np.asarray(k, dtype=float)
        out = np.where(ka >= 1, ka ** (-self.beta) - (ka + 1.0) ** (-self.beta), 0.0)
        return out if out.ndim else float(out)

    def tail_prefix(self, n: int) -> np.ndarray:
        """Read-only ``[sum_{m<k} tail(m) for k = 1..n]``; last entry is ``w_n``."""
        return _tail_prefix(self.beta, int(n))

    def wandering_rate(self, n: int) -> float:
        """``w_n = sum_{k=1}^n P(phi >= k)``."""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        return float(self.tail_prefix(n)[n - 1])


@dataclass(frozen=True)
class EntranceSet:
    n: int
    points: np.ndarray

    def __post_init__(self):
        if len(self.points) == 0:
            raise ValueError("an entrance set is never empty")

    @property
    def first(self) -> int:
        return int(self.points[0])


@dataclass(frozen=True)
class EntranceBatch:
    """Many entrance sets on the same horizon stored in CSR form.

    Set ``j`` is ``points[offsets[j]:offsets[j+1]]``.
    """
    n: int
    points: np.ndarray
    offsets: np.ndarray

    def __len__(self):
        return len(self.offsets) - 1

    def __getitem__(self, j) -> EntranceSet:
        return EntranceSet(self.n, self.points[self.offsets[j]:self.offsets[j + 1]])

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def owner(self) -> np.ndarray:
        """Term index of every entry of ``points``."""
        return np.repeat(np.arange(len(self)), self.counts)

    @property
    def first(self) -> np.ndarray:
        return self.points[self.offsets[:-1]]


def sample_return(law: ReturnLaw, rng: np.random.Generator, size=None):
    """Draw ``phi`` by inversion: ``ceil(U**(-1/beta) - 1)``.

    Draws beyond ``2**62`` are clipped, which only matters when comparing
    against horizons larger than that.
    """
    k = return_from_uniform(law, rng.random(size))
    return k if size is not None else int(k)


def return_from_uniform(law: ReturnLaw, u):
    """Inverse-CDF map from ``U in [0, 1)`` to a return time (always >= 1)."""
    with np.errstate(divide="ignore", over="ignore"):
        k = np.ceil(np.expm1(-np.log(u) / law.beta))
    return np.clip(np.nan_to_num(k, posinf=_RETURN_CAP), 1, _RETURN_CAP).astype(np.int64)


def regularity_ratio(law: ReturnLaw, N: int) -> float:
    """``max_{1<=n<=N} n P(phi = n) / P(phi > n)``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    n = np.arange(1, N + 1, dtype=float)
    # pmf(n)/tail(n) = ((n+1)/n)**beta - 1, kept in expm1 form for large n
    return float(np.max(n * np.expm1(law.beta * np.log1p(1.0 / n))))


def sample_first_entrance(law: ReturnLaw, n: int, rng: np.random.Generator, size=None):
    """First entrance epoch ``k`` with ``P(k) = P(phi >= k) / w_n`` on ``1..n``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    prefix = law.tail_prefix(n)
    u = rng.random(size) * prefix[-1]
    k = np.minimum(np.searchsorted(prefix, u, side="right") + 1, n)
    return k.astype(np.int64) if size is not None else int(k)


def sample_entrance_batch(law: ReturnLaw, n: int, count: int, rng: np.random.Generator) -> EntranceBatch:
    """``count`` independent entrance sets on ``{1..n}``, vectorized in blocks."""
    if count == 0:
        return EntranceBatch(n, np.zeros(0, np.int64), np.zeros(1, np.int64))
    first = sample_first_entrance(law, n, rng, size=count)
    block = int(min(max(8, 2 * math.ceil(n / law.wandering_rate(n))), n))
    rows = [np.arange(count)]
    vals = [first]
    active = np.arange(count)
    pos = first
    while active.size:
        steps = np.minimum(sample_return(law, rng, size=(active.size, block)), n + 1)
        path = pos[:, None] + np.cumsum(steps, axis=1)
        inside = path <= n
        r, c = np.nonzero(inside)
        rows.append(active[r])
        vals.append(path[r, c])
        keep = inside[:, -1]
        active = active[keep]
        pos = path[keep, -1]
    rows = np.concatenate(rows)
    vals = np.concatenate(vals)
    order = np.argsort(rows, kind="stable")
    counts = np.bincount(rows, minlength=count)
    offsets = np.zeros(count + 1, np.int64)
    np.cumsum(counts, out=offsets[1:])
    return EntranceBatch(n, vals[order], offsets)


def sample_entrance_set(law: ReturnLaw, n: int, rng: np.random.Generator) -> EntranceSet:
    return sample_entrance_batch(law, n, 1, rng)[0]
