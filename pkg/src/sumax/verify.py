"""Statistics that turn draws into pass/fail verdicts, plus the draw-archive format.

Archive layout (``ARCHIVE_VERSION``): a first line ``# sumax-draws v<version>``,
then a CSV header

    source,draw,seed,n,ell,S@<t>...,M@<a>:<b>...

``source`` is ``finite`` or ``limit``; ``n`` is 0 for limit draws.  ``S@t`` holds
the unnormalized sum at grid time ``t`` and ``M@a:b`` the sup measure of the
open interval ``(a, b)``.  Floats use 17 significant digits; an empty max is
``-inf``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

ARCHIVE_VERSION = 1
ARCHIVE_MAGIC = "# sumax-draws v"
KS_C99 = 1.63


class InsufficientTailData(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


def fmt(x: float) -> str:
    return "%.17g" % x


# --------------------------------------------------------------------------
# empirical CDFs and KS


@dataclass(frozen=True)
class EcdfSummary:
    sample: np.ndarray
    count: int
    cdf: object = None

    def __post_init__(self):
        s = np.asarray(self.sample, dtype=float)
        if s.ndim != 1 or s.size != self.count:
            raise ValueError("count must equal the sample length")
        if np.any(np.diff(s) < 0):
            raise ValueError("sample must be sorted ascending")
        object.__setattr__(self, "sample", s)

    @classmethod
    def of(cls, values, cdf=None) -> "EcdfSummary":
        s = np.sort(np.asarray(values, dtype=float).ravel())
        return cls(s, s.size, cdf)

    def merge(self, other: "EcdfSummary") -> "EcdfSummary":
        return EcdfSummary(np.sort(np.concatenate([self.sample, other.sample])), self.count + other.count, self.cdf)

    def __call__(self, x):
        return np.searchsorted(self.sample, x, side="right") / self.count


def ks_distance(sample: EcdfSummary, cdf=None) -> float:
    """``sup |F_N - F|`` using both one-sided gaps at every order statistic."""
    cdf = sample.cdf if cdf is None else cdf
    if sample.count < 1:
        raise ValueError("empty sample")
    f = np.asarray(cdf(sample.sample), dtype=float)
    i = np.arange(1, sample.count + 1)
    return float(max(np.max(i / sample.count - f), np.max(f - (i - 1) / sample.count)))


def ks_two_sample(x, y) -> float:
    return float(stats.ks_2samp(np.asarray(x), np.asarray(y)).statistic)


def ks_critical(n1: int, n2=None, c: float = KS_C99) -> float:
    """1% critical value ``c sqrt(1/n1 + 1/n2)`` (one-sample when ``n2`` is None)."""
    return c * math.sqrt(1.0 / n1 + (0.0 if n2 is None else 1.0 / n2))


def frechet_cdf(alpha: float):
    def cdf(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, np.exp(-np.where(x > 0, x, 1.0) ** (-alpha)), 0.0)
    return cdf


# --------------------------------------------------------------------------
# verdicts


@dataclass
class VerdictRecord:
    check: str
    statistic: float
    threshold: float
    passed: bool = None
    budget: int = 0
    seeds: list = field(default_factory=list)
    comparison: str = "<"
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        within = _compare(self.statistic, self.threshold, self.comparison)
        if self.passed is None:
            self.passed = within
        elif bool(self.passed) != within:
            raise ValueError(f"{self.check}: pass flag disagrees with statistic {self.comparison} threshold")
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return _jsonable(d)


def _compare(stat, thr, how):
    if how == "<":
        return bool(stat < thr)
    if how == "<=":
        return bool(stat <= thr)
    if how == ">":
        return bool(stat > thr)
    if how == ">=":
        return bool(stat >= thr)
    raise ValueError(f"unknown comparison {how!r}")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def moment_check(samples, target: float, target_se: float = 0.0, check: str = "moment",
                 seeds=(), budget=None) -> VerdictRecord:
    """Pass iff ``|mean - target| < 3 sqrt(se_mean**2 + target_se**2)``."""
    s = np.asarray(samples, dtype=float)
    if s.size < 100:
        raise ValueError("moment_check needs at least 100 samples")
    se = float(s.std(ddof=1) / math.sqrt(s.size))
    comb = math.sqrt(se * se + target_se * target_se)
    dev = abs(float(s.mean()) - target)
    # exact agreement passes even with zero spread
    thr = 3.0 * comb if comb > 0 else math.inf if dev == 0 else 0.0
    return VerdictRecord(check, dev, thr, budget=int(s.size if budget is None else budget), seeds=list(seeds),
                         detail={"mean": float(s.mean()), "se": se, "target": target, "target_se": target_se})


def tail_dep_estimator(pairs, x: float, min_events: int = 100):
    """``#{|S| > x, M > x} / #{M > x}`` and its binomial standard error."""
    p = np.asarray(pairs, dtype=float)
    cond = p[:, 1] > x
    k = int(cond.sum())
    if k < min_events:
        raise InsufficientTailData(
            f"only {k} pairs with M > {x}; at least {min_events} are needed "
            f"(increase the draw budget to about {int(math.ceil(len(p) * min_events / max(k, 1)))})")
    q = float(np.mean(np.abs(p[cond, 0]) > x))
    return q, math.sqrt(q * (1.0 - q) / k)


def independence_check(pairs):
    """Spearman rank correlation with its null z-score ``r sqrt(N - 1)``."""
    p = np.asarray(pairs, dtype=float)
    if len(p) < 10_000:
        raise ValueError("independence_check needs at least 1e4 pairs")
    r = float(stats.spearmanr(p[:, 0], p[:, 1]).statistic)
    return r, r * math.sqrt(len(p) - 1)


def non_increasing_within_noise(values, noise) -> bool:
    """Each value is at most the previous one plus the allowed noise."""
    v = np.asarray(values, dtype=float)
    e = np.asarray(noise, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] + e[1:]))


def increasing_within_noise(fractions, counts, k: float = 3.0) -> bool:
    """Fractions never drop by more than ``k`` combined binomial SEs along the ladder."""
    f = np.asarray(fractions, dtype=float)
    c = np.asarray(counts, dtype=float)
    se = np.sqrt(np.maximum(f * (1 - f), 1.0 / c) / c)
    return bool(np.all(f[1:] >= f[:-1] - k * np.hypot(se[1:], se[:-1])))


def truncation_remainder_profile(model, law, n: int, levels, eps: float, draws: int, total: int,
                                 rng: np.random.Generator) -> np.ndarray:
    """Empirical ``P(b_n^{-1} max_k |series beyond ell| > eps)`` for each level ``ell``.

    The series is cut at ``total`` terms as a stand-in for infinity.
    """
    from .finite_n_sim import truncation_remainder

    r = np.array([truncation_remainder(model, law, n, levels, total, rng) for _ in range(draws)])
    return np.mean(r > eps, axis=0)


# --------------------------------------------------------------------------
# reporting


def write_report(records, path, meta=None):
    doc = {"schema": "sumax-report v1", "meta": _jsonable(meta or {}),
           "all_pass": all(r.passed for r in records),
           "checks": [r.to_dict() for r in records]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def format_table(records) -> str:
    width = max([len(r.check) for r in records] + [5])
    lines = [f"{'check':<{width}}  {'statistic':>12}  {'':2} {'threshold':>12}  verdict"]
    for r in records:
        lines.append(f"{r.check:<{width}}  {r.statistic:>12.6g}  {r.comparison:2} {r.threshold:>12.6g}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# draw archives


def _col_S(t):
    return f"S@{t!r}"


def _col_M(B):
    return f"M@{B[0]!r}:{B[1]!r}"


@dataclass
class Archive:
    grid: list
    B_list: list
    source: np.ndarray
    draw: np.ndarray
    seed: np.ndarray
    n: np.ndarray
    ell: np.ndarray
    sums: np.ndarray
    maxima: np.ndarray

    def select(self, source: str, n=None) -> "Archive":
        m = self.source == source
        if n is not None:
            m &= self.n == n
        return Archive(self.grid, self.B_list, self.source[m], self.draw[m], self.seed[m], self.n[m],
                       self.ell[m], self.sums[m], self.maxima[m])

    def column_S(self, t):
        return self.sums[:, self.grid.index(t)]

    def column_M(self, B):
        return self.maxima[:, [tuple(b) for b in self.B_list].index(tuple(B))]


def write_archive(path, grid, B_list, rows):
    """``rows``: iterables ``(source, draw, seed, n, ell, sums, maxima)``."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"{ARCHIVE_MAGIC}{ARCHIVE_VERSION}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source", "draw", "seed", "n", "ell"] + [_col_S(t) for t in grid]
                       + [_col_M(B) for B in B_list])
            for source, draw, seed, n, ell, sums, maxima in rows:
                w.writerow([source, int(draw), int(seed), int(n), int(ell)]
                           + [fmt(v) for v in sums] + [fmt(v) for v in maxima])
    except OSError as exc:
        raise OSError(f"cannot write archive {path}: {exc}") from exc


def read_archive(path) -> Archive:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise OSError(f"cannot read archive {path}: {exc}") from exc
    with fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith(ARCHIVE_MAGIC):
            raise SchemaMismatch(f"{path}: missing archive version line")
        version = first[len(ARCHIVE_MAGIC):]
        if version != str(ARCHIVE_VERSION):
            raise SchemaMismatch(f"{path}: archive version {version!r}, this reader needs {ARCHIVE_VERSION}")
        reader = csv.reader(fh)
        header = next(reader)
        if header[:5] != ["source", "draw", "seed", "n", "ell"]:
            raise SchemaMismatch(f"{path}: unexpected leading columns {header[:5]}")
        grid = [float(c[2:]) for c in header[5:] if c.startswith("S@")]
        B_list = [tuple(float(v) for v in c[2:].split(":")) for c in header[5:] if c.startswith("M@")]
        if len(grid) + len(B_list) != len(header) - 5:
            raise SchemaMismatch(f"{path}: unknown columns in header")
        rows = list(reader)
    k = len(grid)
    src = np.array([r[0] for r in rows], dtype=object)
    ints = np.array([[int(r[1]), int(r[3]), int(r[4])] for r in rows], dtype=np.int64).reshape(-1, 3)
    seeds = np.array([int(r[2]) for r in rows], dtype=np.uint64)
    vals = np.array([[float(v) for v in r[5:]] for r in rows], dtype=float).reshape(-1, len(header) - 5)
    return Archive(grid, B_list, src, ints[:, 0], seeds, ints[:, 1], ints[:, 2], vals[:, :k], vals[:, k:])
