"""Rank correlation of (normalized sum, normalized max) in the finite-variance regime along n.

Prints the Spearman correlation, the z-score at the requested number of draws
and w_n**(-1/6), the size of the leading term relative to the sum.
"""
import argparse
import math

import numpy as np
from scipy import stats

from sumax.finite_n_sim import partial_sum_path, sample_finite_process, sup_measure
from sumax.renewal_chain import ReturnLaw
from sumax.tail_calculus import normalization_schedule, unit_truncated_pareto


def cli():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--ladder", default="1000,10000,100000")
    p.add_argument("--draws", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()

    model, law = unit_truncated_pareto(a.alpha), ReturnLaw(a.beta)
    rng = np.random.default_rng(a.seed)
    for n in map(int, a.ladder.split(",")):
        sc = normalization_schedule(model, law, n)
        s = np.empty(a.draws)
        m = np.empty(a.draws)
        for i in range(a.draws):
            d = sample_finite_process(model, law, n, None, rng)
            s[i] = partial_sum_path(d, [1.0])[0] / sc.sum_scale_finite_variance
            m[i] = sup_measure(d, (0.0, 1.0)) / sc.b_n
        r = stats.spearmanr(s, m).statistic
        print(f"n={n:>7}  w_n={sc.w_n:9.2f}  spearman={r:.4f}  z={r * math.sqrt(a.draws - 1):7.2f}  "
              f"w_n^(-1/6)={sc.w_n ** (-1 / 6):.4f}")


if __name__ == "__main__":
    cli()
