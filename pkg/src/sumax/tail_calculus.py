"""Levy tail models, their generalized inverses and the normalizing constants.

Two tail models are supported:

* ``pure-Pareto``: ``tail(x) = scale * x**(-alpha)`` for every ``x > 0``
  (infinite variance, ``alpha < 2``);
* ``unit-truncated-Pareto``: ``tail(x) = scale`` for ``x <= 1`` and
  ``scale * x**(-alpha)`` above 1 (finite variance iff ``alpha > 2``).

``tail`` is the one-sided mass ``rho((x, inf))``; the measure is symmetric so
the same mass sits on ``(-inf, -x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .renewal_chain import ReturnLaw

PURE_PARETO = "pure-Pareto"
UNIT_TRUNCATED_PARETO = "unit-truncated-Pareto"
KINDS = (PURE_PARETO, UNIT_TRUNCATED_PARETO)


def gamma_fn(x: float) -> float:
    """Euler gamma function (poles raise ``ValueError``)."""
    return math.gamma(x)


@dataclass(frozen=True)
class LevyTailModel:
    kind: str
    alpha: float
    scale: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown tail model kind {self.kind!r}; expected one of {KINDS}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.kind == PURE_PARETO and not self.alpha < 2:
            raise ValueError("pure-Pareto requires alpha < 2 (integrability of x^2 near 0)")

    @property
    def total_mass(self) -> float:
        """One-sided mass ``tail(0+)``; infinite for pure-Pareto."""
        return math.inf if self.kind == PURE_PARETO else self.scale

    @property
    def finite_variance(self) -> bool:
        return self.kind == UNIT_TRUNCATED_PARETO and self.alpha > 2

    def second_moment(self) -> float:
        """Closed form of the two-sided integral of ``x**2`` against the measure."""
        if not self.finite_variance:
            raise ValueError(f"{self.kind} with alpha={self.alpha} has infinite second moment")
        # density scale*alpha*x^(-alpha-1) on (1, inf), both sides
        return 2.0 * self.scale * self.alpha / (self.alpha - 2.0)


def pure_pareto(alpha: float, scale: float = 0.5) -> LevyTailModel:
    return LevyTailModel(PURE_PARETO, alpha, scale)


def unit_truncated_pareto(alpha: float, scale: float = 0.5) -> LevyTailModel:
    return LevyTailModel(UNIT_TRUNCATED_PARETO, alpha, scale)


def tail(model: LevyTailModel, x):
    """One-sided upper tail mass ``rho((x, inf))``. Accepts scalars or arrays."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0) or np.any(np.isnan(xa)):
        raise ValueError("tail is defined for x > 0 only")
    out = model.scale * xa ** (-model.alpha)
    if model.kind == UNIT_TRUNCATED_PARETO:
        out = np.where(xa <= 1.0, model.scale, out)
    return out if out.ndim else float(out)


def tail_inverse(model: LevyTailModel, y):
    """Generalized inverse ``inf{x > 0 : tail(x) <= y}``; zero once ``y >= tail(0+)``."""
    ya = np.asarray(y, dtype=float)
    if np.any(ya <= 0) or np.any(np.isnan(ya)):
        raise ValueError("tail_inverse is defined for y > 0 only")
    out = (ya / model.scale) ** (-1.0 / model.alpha)
    if model.kind == UNIT_TRUNCATED_PARETO:
        out = np.where(ya >= model.scale, 0.0, out)
    return out if out.ndim else float(out)


def stable_const(alpha: float) -> float:
    if not 0 < alpha < 2:
        raise ValueError(f"stable_const needs alpha in (0, 2), got {alpha}")
    if alpha == 1:
        return 2.0 / math.pi
    return 1.0 / (gamma_fn(1.0 - alpha) * math.cos(math.pi * alpha / 2.0))


def ell_beta(beta: float) -> int:
    """Largest integer strictly below ``1 / (1 - beta)``.

    Values of ``1/(1-beta)`` within 1e-12 (relative) of an integer are treated
    as that integer, so ``beta=0.8`` gives 4 despite ``1 - 0.8`` rounding low.
    """
    if not 0 < beta < 1:
        raise ValueError(f"ell_beta needs beta in (0, 1), got {beta}")
    r = 1.0 / (1.0 - beta)
    nearest = round(r)
    if abs(r - nearest) <= 1e-12 * r:
        return int(nearest) - 1
    return int(math.floor(r))


@dataclass(frozen=True)
class NormalizationSchedule:
    n: int
    w_n: float
    b_n: float
    c_n: float
    gamma_n: float

    @property
    def sum_scale_finite_variance(self) -> float:
        """``n / sqrt(w_n)``: the sum normalizer of the finite-variance regime."""
        return self.n / math.sqrt(self.w_n)


def normalization_schedule(model: LevyTailModel, law: ReturnLaw, n: int) -> NormalizationSchedule:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    w_n = law.wandering_rate(n)
    b_n = tail_inverse(model, 1.0 / w_n)
    gamma_n = n / w_n / gamma_fn(2.0 - law.beta)
    return NormalizationSchedule(n=n, w_n=w_n, b_n=b_n, c_n=b_n * gamma_n, gamma_n=gamma_n)


def fbm_scale(model: LevyTailModel, beta: float, mc_budget: int, rng: np.random.Generator):
    """Monte Carlo evaluation of the fBm scale ``c_beta``.

    Returns ``(c_beta, standard_error)``; the negative moment
    ``E[S_beta(1)**(-2 beta)]`` is estimated from ``mc_budget`` Kanter draws and
    the error is propagated by the delta method.
    """
    from .subordinator_kit import sample_positive_stable

    if not model.finite_variance:
        raise ValueError("fbm_scale requires a model with finite second moment")
    if mc_budget < 10_000:
        raise ValueError("fbm_scale needs mc_budget >= 1e4")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    s = sample_positive_stable(beta, rng, size=mc_budget)
    m = s ** (-2.0 * beta)
    mean = float(m.mean())
    se_mean = float(m.std(ddof=1) / math.sqrt(mc_budget))
    k = model.second_moment() * gamma_fn(1 + 2 * beta) / (gamma_fn(2 - beta) * gamma_fn(2 + beta))
    c = math.sqrt(k * mean)
    return c, k * se_mean / (2.0 * c)
