"""Samplers for the limit objects.

* fractional Brownian motion with ``Var B_H(t) = t**(2H) / 2``;
* the truncated limit sum ``S_ell(t) = (2 C_alpha)**(1/alpha) sum_j eps_j Gamma_j**(-1/alpha) L_j((t - V_j)_+)``;
* the limit sup measure ``M_ell(B)``: the largest ``sum_{j in S} Gamma_j**(-1/alpha)`` over
  index sets ``S`` whose shifted stable ranges ``V_j + R_j`` have a common point in ``B``;
* the tail-dependence building block ``A = 2**(1/alpha) eps L(1 - V)``.

``L_j`` is the inverse of an independent ``beta``-stable subordinator ``sigma_j``,
``R_j`` its closed range and ``V_j`` a delay with ``P(V <= x) = x**(1 - beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .finite_n_sim import SeriesEnvelope, best_subset_sum, sample_envelope
from .subordinator_kit import (DEFAULT_MESH_PER_UNIT, DEFAULT_RESOLUTION, MonotonePath, closed_range, hits,
                               right_cont_inverse, sample_delay, sample_positive_stable, shift_set,
                               subordinator_reaching)
from .tail_calculus import ell_beta, stable_const

MAX_FBM_GRID = 2 ** 12


def _check_ab(alpha, beta):
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")


def sum_weight(alpha: float) -> float:
    """``(2 C_alpha)**(1/alpha)``."""
    return (2.0 * stable_const(alpha)) ** (1.0 / alpha)


# --------------------------------------------------------------------------
# fractional Brownian motion


def fbm_covariance(H: float, grid) -> np.ndarray:
    t = np.asarray(grid, dtype=float)
    tt, ss = np.meshgrid(t, t, indexing="ij")
    h2 = 2.0 * H
    return 0.25 * (tt ** h2 + ss ** h2 - np.abs(tt - ss) ** h2)


def sample_fbm(H: float, grid, rng: np.random.Generator, size=None) -> np.ndarray:
    """Exact Gaussian draw(s) of ``B_H`` on ``grid`` via a Cholesky factor.

    Returns shape ``(len(grid),)`` or ``(size, len(grid))``.  Grid points at 0 are
    exactly 0.
    """
    if not 0 < H < 1:
        raise ValueError(f"H must lie in (0, 1), got {H}")
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t.size > MAX_FBM_GRID:
        raise ValueError(f"grid must be 1-d with 1..{MAX_FBM_GRID} points")
    if np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > 1:
        raise ValueError("grid must be strictly increasing within [0, 1]")
    pos = t > 0
    cov = fbm_covariance(H, t[pos])
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"fBm covariance is not numerically positive definite "
                         f"(condition number {np.linalg.cond(cov):.3e}); use a coarser grid") from exc
    shape = (1 if size is None else size, t.size)
    out = np.zeros(shape)
    out[:, pos] = rng.standard_normal((shape[0], int(pos.sum()))) @ chol.T
    return out[0] if size is None else out


# --------------------------------------------------------------------------
# single draws with full path information


def _local_time(path: MonotonePath, x: float) -> float:
    # L(0) = 0 for a subordinator without drift; the mesh would give one step instead
    return 0.0 if x <= 0 else right_cont_inverse(path, x)


@dataclass(frozen=True)
class LimitDraw:
    alpha: float
    beta: float
    envelope: SeriesEnvelope
    delays: np.ndarray
    paths: tuple
    resolution: float
    grid: np.ndarray
    B_list: tuple
    sums: np.ndarray
    maxima: np.ndarray

    @property
    def level(self) -> int:
        return self.envelope.level

    def local_times(self, t: float) -> np.ndarray:
        return np.array([_local_time(p, t - v) for p, v in zip(self.paths, self.delays)])

    def sum_at(self, t: float) -> float:
        w = self.envelope.signs * self.envelope.gammas ** (-1.0 / self.alpha)
        return sum_weight(self.alpha) * float(np.dot(w, self.local_times(t)))

    def shifted_ranges(self):
        """``(V_j + R_j) cap [0, 1]`` at the draw's resolution."""
        return [shift_set(closed_range(p, self.resolution), float(v)).clip(0.0, 1.0)
                for p, v in zip(self.paths, self.delays)]

    def sup_at(self, B, cap=None) -> float:
        cap = ell_beta(self.beta) if cap is None else cap
        return best_subset_sum(self.shifted_ranges(), self.envelope.gammas ** (-1.0 / self.alpha), B, cap)


def sample_limit_pair(alpha: float, beta: float, ell: int, grid, B_list, rng: np.random.Generator,
                      mesh_per_unit: int = DEFAULT_MESH_PER_UNIT,
                      resolution: float = DEFAULT_RESOLUTION, with_sums: bool = True) -> LimitDraw:
    """One joint draw of ``S_ell`` on ``grid`` and ``M_ell(B)`` for every ``B``.

    Each subordinator is simulated on a mesh of ``mesh_per_unit`` steps per unit
    time until it passes ``1 - V_j``.  ``with_sums=False`` leaves ``sums`` empty
    and accepts any ``alpha > 0``.
    """
    if with_sums:
        _check_ab(alpha, beta)
    elif not (alpha > 0 and 0 < beta < 1):
        raise ValueError("need alpha > 0 and beta in (0, 1)")
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    env = sample_envelope(ell, rng)
    delays = np.atleast_1d(sample_delay(beta, rng, size=ell))
    paths = tuple(subordinator_reaching(beta, 1.0 - v, rng, mesh_per_unit) for v in delays)
    draw = LimitDraw(alpha, beta, env, delays, paths, resolution, grid, tuple(B_list),
                     np.zeros(0), np.zeros(0))
    sums = np.array([draw.sum_at(t) for t in grid]) if with_sums else np.zeros(0)
    ranges = draw.shifted_ranges()
    weights = env.gammas ** (-1.0 / alpha)
    cap = ell_beta(beta)
    maxima = np.array([best_subset_sum(ranges, weights, B, cap) for B in B_list])
    object.__setattr__(draw, "sums", sums)
    object.__setattr__(draw, "maxima", maxima)
    return draw


# --------------------------------------------------------------------------
# vectorized draws of (S_ell(t), M_ell(B)) when at most one range can be shared


def sample_limit_batch(alpha: float, beta: float, ell: int, size: int, rng: np.random.Generator,
                       grid=(1.0,), B_list=((0.0, 1.0),),
                       mesh_per_unit: int = DEFAULT_MESH_PER_UNIT,
                       resolution: float = DEFAULT_RESOLUTION, with_sums: bool = True):
    """``size`` joint draws of ``S_ell`` on ``grid`` and ``M_ell(B)``; needs ``beta <= 1/2``.

    With ``ell_beta = 1`` the sup measure is the largest weight whose shifted
    range meets ``B``.  A range hits ``B = (a, b)`` whenever ``V_j`` lies in ``B``
    and misses it when ``V_j >= b``; only the remaining terms that can still
    change the maximum get a simulated path (shared with their local times).
    For a single grid time all other local times are exact,
    ``L(x) = x**beta * S**(-beta)``; several grid times need a path per term.

    ``with_sums=False`` skips the sums and accepts any ``alpha > 0`` (the sup
    measure alone makes sense for every tail index).

    Returns ``(sums, maxima)`` with shapes ``(size, len(grid))`` and
    ``(size, len(B_list))``; ``sums`` is None without sums.
    """
    if with_sums:
        _check_ab(alpha, beta)
    elif not (alpha > 0 and 0 < beta < 1):
        raise ValueError("need alpha > 0 and beta in (0, 1)")
    if ell_beta(beta) != 1:
        raise ValueError("sample_limit_batch needs beta <= 1/2; use sample_limit_pair")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    gammas = np.cumsum(rng.standard_exponential((size, ell)), axis=1)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(size, ell))
    delays = sample_delay(beta, rng, size=(size, ell))
    weights = gammas ** (-1.0 / alpha)
    multi = with_sums and grid.size > 1
    ltime = np.zeros((size, ell, grid.size))
    if with_sums and not multi:
        x = grid[0] - delays
        s = sample_positive_stable(beta, rng, size=(size, ell))
        ltime[:, :, 0] = np.where(x > 0, np.abs(x) ** beta * s ** (-beta), 0.0)

    hit = np.zeros((len(B_list), size, ell), dtype=bool)
    undecided = np.zeros((len(B_list), size, ell), dtype=bool)
    for b, (lo, hi) in enumerate(B_list):
        hit[b] = (delays > lo) & (delays < hi)
        undecided[b] = delays <= lo
    # a term only matters for the max if no earlier term is already a sure hit
    cols = np.arange(ell)
    first_hit = np.where(hit.any(axis=2), hit.argmax(axis=2), ell)
    need = (undecided & (cols[None, None, :] < first_hit[:, :, None])).any(axis=0)
    if multi:
        need[:] = True
    top = max([hi for _, hi in B_list] + [float(grid.max()) if with_sums else 0.0])
    for i, j in zip(*np.nonzero(need)):
        v = delays[i, j]
        path = subordinator_reaching(beta, max(top - v, 0.0), rng, mesh_per_unit)
        if with_sums:
            ltime[i, j] = [_local_time(path, t - v) for t in grid]
        if undecided[:, i, j].any():
            rng_set = shift_set(closed_range(path, resolution), float(v)).clip(0.0, 1.0)
            for b, B in enumerate(B_list):
                if undecided[b, i, j]:
                    hit[b, i, j] = hits(rng_set, B)
    sums = None
    if with_sums:
        sums = sum_weight(alpha) * np.einsum("ij,ijk->ik", signs * weights, ltime)
    maxima = np.max(np.where(hit, weights[None], 0.0), axis=2).T
    return sums, maxima


# --------------------------------------------------------------------------
# tail dependence


def sample_A(alpha: float, beta: float, rng: np.random.Generator, size=None):
    """``A = 2**(1/alpha) eps L(1 - V)`` with exact local times."""
    _check_ab(alpha, beta)
    eps = rng.choice(np.array([-1.0, 1.0]), size=size)
    v = sample_delay(beta, rng, size=size)
    s = sample_positive_stable(beta, rng, size=size)
    a = 2.0 ** (1.0 / alpha) * eps * (1.0 - v) ** beta * s ** (-beta)
    return a if size is not None else float(a)


def tail_dep_functional(a, alpha: float):
    """``E[|A|**alpha 1{|A| <= 1}] + P(|A| > 1)`` from draws ``a``: ``(value, se)``."""
    a = np.abs(np.asarray(a, dtype=float))
    g = np.minimum(a, 1.0) ** alpha
    se = float(g.std(ddof=1) / math.sqrt(g.size)) if g.size > 1 else math.inf
    return float(g.mean()), se


def tail_dep_limit(alpha: float, beta: float, mc_budget: int, rng: np.random.Generator,
                   chunk: int = 1_000_000):
    """Monte Carlo value of the limiting tail dependence coefficient with its SE."""
    if mc_budget < 100_000:
        raise ValueError("tail_dep_limit needs mc_budget >= 1e5")
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < mc_budget:
        m = min(chunk, mc_budget - done)
        g = np.minimum(np.abs(sample_A(alpha, beta, rng, size=m)), 1.0) ** alpha
        total += float(g.sum())
        total_sq += float(np.dot(g, g))
        done += m
    mean = total / done
    var = (total_sq - done * mean * mean) / (done - 1)
    return mean, math.sqrt(max(var, 0.0) / done)
