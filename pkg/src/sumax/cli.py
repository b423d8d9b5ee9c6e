"""Batch experiment runner.

Subcommands::

    sumax simulate   draw archives only (draws_finite.csv, draws_limit.csv)
    sumax verify     archives -> report.json and a verdict table
    sumax run        simulate + verify
    sumax reference  compute and cache oracles.json

The configuration is one flat JSON document (``--config``); every field can be
overridden by a flag of the same name, e.g. ``--alpha 1.2 --n_ladder 1000,10000``.

Random streams: draw ``i`` of the finite-n archive at sample size ``n`` uses
``SeedSequence(seed, spawn_key=(1, n, i))``.  Limit draws come in fixed chunks of
``LIMIT_CHUNK`` draws with ``spawn_key=(2, chunk)``; auxiliary checks and oracles
use tags 3 and 4.  Outputs therefore do not depend on the number of workers.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import multiprocessing
import os
import sys
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import verify as vf
from .finite_n_sim import poissonize, sample_finite_process, partial_sum_path, sup_measure
from .limit_sim import sample_fbm, sample_limit_batch, sample_limit_pair, tail_dep_limit
from .renewal_chain import ReturnLaw
from .subordinator_kit import local_time_by_paths, sample_positive_stable
from .tail_calculus import (ell_beta, fbm_scale, normalization_schedule, pure_pareto, stable_const,
                            unit_truncated_pareto)

FINITE_VARIANCE = "finite-variance"
INFINITE_VARIANCE = "infinite-variance"
TAG_FINITE, TAG_LIMIT, TAG_CHECK, TAG_ORACLE = 1, 2, 3, 4
LIMIT_CHUNK = 5000
FINITE_CHUNK = 50


@dataclass
class ExperimentConfig:
    regime: str = INFINITE_VARIANCE
    alpha: float = 1.5
    beta: float = 0.4
    n_ladder: list = field(default_factory=lambda: [1000, 10000, 100000])
    ell: int = None
    mc_budget: int = 200_000
    grid: list = field(default_factory=lambda: [1.0])
    B_list: list = field(default_factory=lambda: [[0.0, 1.0], [0.2, 0.8]])
    seed: int = 0
    resolution: float = 1e-4
    out: str = "out"
    workers: int = 0
    mesh_per_unit: int = 2 ** 12
    finite_draws: int = 2000
    limit_draws: int = 20000
    tail_x: list = field(default_factory=lambda: [4.0, 8.0, 16.0])
    agreement_ell: int = 10
    agreement_B: list = field(default_factory=lambda: [0.2, 0.8])
    agreement_draws: int = 500
    agreement_threshold: float = 0.95
    check_draws: int = 2000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.regime not in (FINITE_VARIANCE, INFINITE_VARIANCE):
            raise ValueError(f"regime must be {FINITE_VARIANCE!r} or {INFINITE_VARIANCE!r}")
        if self.regime == FINITE_VARIANCE and not self.alpha > 2:
            raise ValueError(f"finite-variance regime requires alpha > 2, got {self.alpha}")
        if self.regime == INFINITE_VARIANCE and not 0 < self.alpha < 2:
            raise ValueError(f"infinite-variance regime requires 0 < alpha < 2, got {self.alpha}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.n_ladder or any(int(n) < 1 for n in self.n_ladder):
            raise ValueError("n_ladder must be a nonempty list of positive integers")
        if list(self.n_ladder) != sorted(set(self.n_ladder)):
            raise ValueError("n_ladder must be strictly increasing")
        for name in ("mc_budget", "finite_draws", "limit_draws", "agreement_draws", "check_draws",
                     "mesh_per_unit", "agreement_ell"):
            if not int(getattr(self, name)) > 0:
                raise ValueError(f"{name} must be positive")
        if self.ell is not None and self.ell < 1:
            raise ValueError("ell must be positive (or null for the default)")
        if not self.grid or any(not 0 <= t <= 1 for t in self.grid) or list(self.grid) != sorted(set(self.grid)):
            raise ValueError("grid must be strictly increasing within [0, 1]")
        for B in list(self.B_list) + [self.agreement_B]:
            if len(B) != 2 or not 0 <= B[0] < B[1] <= 1:
                raise ValueError(f"interval {B} is not a nonempty open interval in [0, 1]")
        if self.resolution < 0:
            raise ValueError("resolution must be non-negative")
        if self.workers < 0:
            raise ValueError("workers must be >= 0 (0 means one per processor)")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def model(self):
        if self.regime == FINITE_VARIANCE:
            return unit_truncated_pareto(self.alpha)
        return pure_pareto(self.alpha)

    @property
    def law(self) -> ReturnLaw:
        return ReturnLaw(self.beta)

    @property
    def finite_level(self):
        """Truncation level of finite-n draws; None keeps every nonzero term."""
        if self.ell is not None:
            return self.ell
        if self.regime == FINITE_VARIANCE:
            return None
        return 50 if self.alpha > 1 else 200

    @property
    def limit_level(self) -> int:
        if self.ell is not None:
            return self.ell
        return 50 if self.alpha > 1 else 200

    @property
    def n_workers(self) -> int:
        return self.workers or os.cpu_count() or 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


def stream(seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


# --------------------------------------------------------------------------
# draws


def _finite_task(args):
    cfg_dict, n, lo, hi = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    model, law = cfg.model, cfg.law
    B_list = [tuple(B) for B in cfg.B_list]
    rows = []
    for i in range(lo, hi):
        draw = sample_finite_process(model, law, n, cfg.finite_level, stream(cfg.seed, TAG_FINITE, n, i))
        rows.append(("finite", i, cfg.seed, n, draw.level, partial_sum_path(draw, cfg.grid),
                     [sup_measure(draw, B) for B in B_list]))
    return rows


def _limit_task(args):
    cfg_dict, chunk = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    rng = stream(cfg.seed, TAG_LIMIT, chunk)
    lo = chunk * LIMIT_CHUNK
    hi = min(lo + LIMIT_CHUNK, cfg.limit_draws)
    size = hi - lo
    ell = cfg.limit_level
    B_list = [tuple(B) for B in cfg.B_list]
    finite_var = cfg.regime == FINITE_VARIANCE
    kw = dict(mesh_per_unit=cfg.mesh_per_unit, resolution=cfg.resolution)
    if ell_beta(cfg.beta) == 1:
        sums, maxima = sample_limit_batch(cfg.alpha, cfg.beta, ell, size, rng, grid=cfg.grid, B_list=B_list,
                                          with_sums=not finite_var, **kw)
    else:
        draws = [sample_limit_pair(cfg.alpha, cfg.beta, ell, cfg.grid, B_list, rng,
                                   with_sums=not finite_var, **kw) for _ in range(size)]
        sums = np.array([d.sums for d in draws]) if not finite_var else None
        maxima = np.array([d.maxima for d in draws])
    if finite_var:
        # normalized sums have asymptotic variance c_beta**2 while Var B_H(1) = 1/2
        c_beta = reference_oracles(cfg)["fbm_scale"]["value"]
        sums = math.sqrt(2.0) * c_beta * sample_fbm((1 + cfg.beta) / 2, cfg.grid, rng, size=size)
    return [("limit", lo + k, cfg.seed, 0, ell, sums[k], maxima[k]) for k in range(size)]


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield fn(t)
        return
    with multiprocessing.get_context("fork").Pool(workers) as pool:
        yield from pool.imap(fn, tasks)


def simulate(cfg: ExperimentConfig):
    os.makedirs(cfg.out, exist_ok=True)
    d = cfg.to_dict()
    tasks = [(d, int(n), lo, min(lo + FINITE_CHUNK, cfg.finite_draws))
             for n in cfg.n_ladder for lo in range(0, cfg.finite_draws, FINITE_CHUNK)]
    rows = (r for chunk in _map(_finite_task, tasks, cfg.n_workers) for r in chunk)
    vf.write_archive(os.path.join(cfg.out, "draws_finite.csv"), cfg.grid, cfg.B_list, rows)
    if cfg.regime == FINITE_VARIANCE:
        reference_oracles(cfg)  # computed once here rather than in every worker
    ltasks = [(d, c) for c in range(math.ceil(cfg.limit_draws / LIMIT_CHUNK))]
    rows = (r for chunk in _map(_limit_task, ltasks, cfg.n_workers) for r in chunk)
    vf.write_archive(os.path.join(cfg.out, "draws_limit.csv"), cfg.grid, cfg.B_list, rows)


# --------------------------------------------------------------------------
# oracles


def _oracle_key(cfg):
    return {"regime": cfg.regime, "alpha": cfg.alpha, "beta": cfg.beta, "mc_budget": cfg.mc_budget,
            "seed": cfg.seed, "agreement_ell": cfg.agreement_ell, "agreement_B": list(cfg.agreement_B)}


def compute_oracles(cfg: ExperimentConfig) -> dict:
    out = {"key": _oracle_key(cfg)}
    if cfg.regime == INFINITE_VARIANCE:
        v, se = tail_dep_limit(cfg.alpha, cfg.beta, max(cfg.mc_budget, 100_000), stream(cfg.seed, TAG_ORACLE, 1))
        out["tail_dep_limit"] = {"value": v, "se": se, "budget": max(cfg.mc_budget, 100_000)}
        # calibration of the two-representation agreement fraction at the smallest n
        n = int(cfg.n_ladder[0])
        frac, cnt = agreement_fraction(cfg, n, min(cfg.agreement_draws, 200), TAG_ORACLE, 2)
        out["agreement_calibration"] = {"n": n, "fraction": frac, "draws": cnt,
                                        "threshold": cfg.agreement_threshold}
    else:
        c, se = fbm_scale(cfg.model, cfg.beta, max(cfg.mc_budget, 10_000), stream(cfg.seed, TAG_ORACLE, 3))
        out["fbm_scale"] = {"value": c, "se": se, "budget": max(cfg.mc_budget, 10_000)}
    return out


def reference_oracles(cfg: ExperimentConfig, recompute: bool = False) -> dict:
    """Load ``oracles.json`` from the output directory if it matches the config, else compute and cache it."""
    path = os.path.join(cfg.out, "oracles.json")
    if not recompute and os.path.exists(path):
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("key") == _oracle_key(cfg):
            return doc
    doc = compute_oracles(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


# --------------------------------------------------------------------------
# checks


def agreement_fraction(cfg: ExperimentConfig, n: int, draws: int, *key):
    """Fraction of Poissonized draws whose two sup-measure representations agree."""
    law = cfg.law
    model = cfg.model
    sched = normalization_schedule(model, law, n)
    B = tuple(cfg.agreement_B)
    cap = ell_beta(cfg.beta) + 2
    rng = stream(cfg.seed, *key, n)
    agree = 0
    for _ in range(draws):
        pd = poissonize(sample_finite_process(model, law, n, cfg.agreement_ell, rng), law, sched.gamma_n, rng)
        agree += math.isclose(pd.max_intersection(B, cap), pd.max_direct(B), rel_tol=1e-12, abs_tol=0.0)
    return agree / draws, draws


def _trend_record(name, values, noise, budget, seeds, detail):
    # largest rise beyond the allowed noise along the ladder
    v = np.asarray(values)
    rise = float(np.max(v[1:] - v[:-1] - np.asarray(noise)[1:])) if v.size > 1 else -math.inf
    return vf.VerdictRecord(name, rise, 0.0, budget=budget, seeds=seeds, comparison="<=",
                            detail=dict(detail, values=list(map(float, v)), noise=list(map(float, noise))))


def _anchor_checks(cfg, seeds):
    recs = []
    rng = stream(cfg.seed, TAG_CHECK, 1)
    N = max(cfg.mc_budget, 100)
    s = sample_positive_stable(cfg.beta, rng, size=N)
    recs.append(vf.moment_check(np.exp(-s), math.exp(-1.0), 0.0, "subordinator_laplace", seeds, N))
    lt = local_time_by_paths(cfg.beta, 1.0, cfg.check_draws, rng, cfg.mesh_per_unit)
    kanter = sample_positive_stable(cfg.beta, rng, size=N) ** (-cfg.beta)
    ks = float(kanter.std(ddof=1) / math.sqrt(N))
    recs.append(vf.moment_check(lt, float(kanter.mean()), ks, "local_time_cross_oracle", seeds,
                                cfg.check_draws + N))
    if cfg.regime == FINITE_VARIANCE:
        b = sample_fbm((1 + cfg.beta) / 2, [1.0], rng, size=N)[:, 0]
        recs.append(vf.moment_check(b ** 2, 0.5, 0.0, "fbm_variance", seeds, N))
    return recs


def _need_unit(cfg, arch):
    if 1.0 not in arch.grid:
        raise ValueError("the archives need grid time 1.0 for the marginal checks")


def verify_archives(cfg: ExperimentConfig):
    fin = vf.read_archive(os.path.join(cfg.out, "draws_finite.csv"))
    lim = vf.read_archive(os.path.join(cfg.out, "draws_limit.csv"))
    _need_unit(cfg, fin)
    oracles = reference_oracles(cfg)
    seeds = [cfg.seed]
    model, law = cfg.model, cfg.law
    recs = []
    ladder = [int(n) for n in cfg.n_ladder]
    has_unit = (0.0, 1.0) in [tuple(B) for B in fin.B_list]
    lim_M = lim.column_M((0.0, 1.0)) if has_unit else None

    if cfg.regime == INFINITE_VARIANCE:
        lim_S = lim.column_S(1.0) * stable_const(cfg.alpha) ** (-1.0 / cfg.alpha)
        if has_unit and ell_beta(cfg.beta) == 1:
            recs.append(vf.VerdictRecord("frechet_marginal",
                                         vf.ks_distance(vf.EcdfSummary.of(lim_M), vf.frechet_cdf(cfg.alpha)),
                                         vf.ks_critical(lim_M.size), budget=int(lim_M.size), seeds=seeds))
        ks_s, ks_m, noise = [], [], []
        for n in ladder:
            f = fin.select("finite", n)
            sc = normalization_schedule(model, law, n)
            ks_s.append(vf.ks_two_sample(f.column_S(1.0) / sc.c_n, lim_S))
            if has_unit:
                ks_m.append(vf.ks_two_sample(f.column_M((0.0, 1.0)) / sc.b_n, lim_M))
            noise.append(vf.ks_critical(len(f.n), lim_S.size))
        recs.append(_trend_record("sum_marginal_trend", ks_s, noise, len(fin.n), seeds, {"n": ladder}))
        if has_unit:
            recs.append(_trend_record("max_marginal_trend", ks_m, noise, len(fin.n), seeds, {"n": ladder}))
            oracle = oracles["tail_dep_limit"]
            pairs = np.column_stack([lim_S, lim_M])
            ests = {}
            for x in cfg.tail_x:
                try:
                    ests[x] = vf.tail_dep_estimator(pairs, x)
                except vf.InsufficientTailData as exc:
                    ests[x] = (math.nan, math.nan)
                    msg = str(exc)
            x = max(cfg.tail_x)
            q, se = ests[x]
            comb = math.hypot(se, oracle["se"])
            detail = {"oracle": oracle, "estimates": {str(k): v for k, v in ests.items()}}
            if math.isnan(q):
                detail["error"] = msg
                recs.append(vf.VerdictRecord("tail_dependence", math.inf, 0.0, budget=len(pairs), seeds=seeds,
                                             detail=detail))
            else:
                recs.append(vf.VerdictRecord("tail_dependence", abs(q - oracle["value"]), 3 * comb,
                                             budget=len(pairs), seeds=seeds, detail=detail))
                recs.append(vf.VerdictRecord("tail_dependence_positive", q - 3 * se, 0.0, budget=len(pairs),
                                             seeds=seeds, comparison=">"))
        # truncation stability: the same number of draws at twice the level
        rng = stream(cfg.seed, TAG_CHECK, 2)
        m = min(lim_S.size, 20_000)
        if ell_beta(cfg.beta) == 1:
            s2, _ = sample_limit_batch(cfg.alpha, cfg.beta, 2 * cfg.limit_level, m, rng)
            s2 = s2[:, 0]
        else:
            s2 = np.array([sample_limit_pair(cfg.alpha, cfg.beta, 2 * cfg.limit_level, [1.0], [], rng,
                                             cfg.mesh_per_unit).sums[0] for _ in range(m)])
        s2 = s2 * stable_const(cfg.alpha) ** (-1.0 / cfg.alpha)
        recs.append(vf.VerdictRecord("truncation_stability", vf.ks_two_sample(lim_S[:m], s2),
                                     2 * vf.ks_critical(m, m), budget=2 * m, seeds=seeds,
                                     detail={"ell": cfg.limit_level}))
        fr, cnt = zip(*[agreement_fraction(cfg, n, cfg.agreement_draws, TAG_CHECK, 3) for n in ladder])
        f, c = np.asarray(fr), np.asarray(cnt, dtype=float)
        se = np.sqrt(np.maximum(f * (1 - f), 1.0 / c) / c)
        # largest drop along the ladder measured in combined standard errors
        drop = float(np.max((f[:-1] - f[1:]) / np.hypot(se[:-1], se[1:]))) if f.size > 1 else -math.inf
        detail = {"n": ladder, "fractions": list(fr), "calibration": oracles.get("agreement_calibration")}
        recs.append(vf.VerdictRecord("representation_agreement", fr[-1], cfg.agreement_threshold,
                                     budget=int(sum(cnt)), seeds=seeds, comparison=">", detail=detail))
        recs.append(vf.VerdictRecord("representation_agreement_trend", drop, 3.0, budget=int(sum(cnt)),
                                     seeds=seeds, detail=detail))
    else:
        c_beta = oracles["fbm_scale"]["value"]
        zs, ks_s, ks_m, noise = [], [], [], []
        norm_cdf = stats.norm(scale=c_beta).cdf
        for n in ladder:
            f = fin.select("finite", n)
            sc = normalization_schedule(model, law, n)
            S = f.column_S(1.0) / sc.sum_scale_finite_variance
            ks_s.append(vf.ks_distance(vf.EcdfSummary.of(S), norm_cdf))
            noise.append(vf.ks_critical(len(f.n), lim.n.size if has_unit else None))
            if has_unit:
                M = f.column_M((0.0, 1.0)) / sc.b_n
                ks_m.append(vf.ks_two_sample(M, lim_M))
                zs.append(vf.independence_check(np.column_stack([S, M]))[1] if len(S) >= 10_000
                          else stats.spearmanr(S, M).statistic * math.sqrt(len(S) - 1))
        recs.append(_trend_record("sum_marginal_trend", ks_s, noise, len(fin.n), seeds, {"n": ladder}))
        if has_unit:
            recs.append(_trend_record("max_marginal_trend", ks_m, noise, len(fin.n), seeds, {"n": ladder}))
            az = np.abs(zs)
            detail = {"n": ladder, "z": list(map(float, zs))}
            recs.append(vf.VerdictRecord("independence", float(az[-1]), 3.0, budget=len(fin.n), seeds=seeds,
                                         detail=detail))
            # growth of |z| from the bottom to the top of the ladder; null sd of the difference is sqrt(2)
            recs.append(vf.VerdictRecord("independence_trend", float(az[-1] - az[0]), 3.0 * math.sqrt(2.0),
                                         budget=len(fin.n), seeds=seeds, detail=detail))
    recs.extend(_anchor_checks(cfg, seeds))
    return recs


# --------------------------------------------------------------------------
# command line


def _parse_list(text):
    text = text.strip()
    if text.startswith("["):
        return json.loads(text)
    return [json.loads(v) for v in text.split(",") if v.strip()]


def _flag_type(f):
    default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
    if isinstance(default, list):
        return _parse_list
    if f.name == "ell":
        return lambda s: None if s.lower() in ("null", "none") else int(s)
    if isinstance(default, bool):
        return lambda s: s.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sumax", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [("simulate", "write the draw archives"), ("verify", "check archives, write report.json"),
                       ("run", "simulate then verify"), ("reference", "compute and cache oracles.json")]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="flat JSON configuration file")
        for f in dataclasses.fields(ExperimentConfig):
            p.add_argument(f"--{f.name}", type=_flag_type(f), default=None, metavar=f.name.upper())
    return parser


def load_config(args) -> ExperimentConfig:
    d = {}
    if args.config:
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(d, dict):
            raise ValueError("the config must be a flat JSON object")
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(args, f.name)
        if v is not None:
            d[f.name] = v
    return ExperimentConfig.from_dict(d)


def _verify_and_report(cfg) -> int:
    recs = verify_archives(cfg)
    doc = vf.write_report(recs, os.path.join(cfg.out, "report.json"), meta={"config": cfg.to_dict()})
    print(vf.format_table(recs))
    return 0 if doc["all_pass"] else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
    except (ValueError, TypeError) as exc:
        parser.error(str(exc))
    except OSError as exc:
        print(f"sumax: error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "simulate":
            simulate(cfg)
            return 0
        if args.command == "reference":
            doc = reference_oracles(cfg, recompute=True)
            print(json.dumps(doc, indent=2, sort_keys=True))
            return 0
        if args.command == "run":
            simulate(cfg)
        return _verify_and_report(cfg)
    except (OSError, vf.SchemaMismatch) as exc:
        print(f"sumax: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
