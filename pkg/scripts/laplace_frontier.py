#!/usr/bin/env python3
"""Where the biased Laplace exists for the conformal release.

For each total budget, prints the smallest calibration size (at the given
number of bins) and the largest number of bins (at the given calibration
size) for which the per-level Laplace scale stays below 1.
"""

import argparse

from evdp.conformal import ScoreQuantizer, laplace_defined
from evdp.privacy import RenyiBudget


def smallest_n(bins, lo, hi, budget):
    q = ScoreQuantizer(bins, lo, hi)
    a, b = 1, 1
    while not laplace_defined(q, b, budget):
        a, b = b, 2 * b
        if b > 10**9:
            return None
    while a < b:
        m = (a + b) // 2
        a, b = (m + 1, b) if not laplace_defined(q, m, budget) else (a, m)
    return b


def largest_bins(n, lo, hi, budget):
    best = 0
    for bins in range(1, 5001):
        if laplace_defined(ScoreQuantizer(bins, lo, hi), n, budget):
            best = bins
    return best


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bins", type=int, default=500)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--s-lo", type=float, default=1.0)
    ap.add_argument("--s-hi", type=float, default=100.0)
    ap.add_argument("--renyi-alpha", default="2,10,50")
    ap.add_argument("--epsilon", default="0.01,0.1,0.5,1,10")
    a = ap.parse_args()
    print("renyi_alpha,epsilon,defined,smallest_n,largest_bins")
    for ra in (float(x) for x in a.renyi_alpha.split(",")):
        for eps in (float(x) for x in a.epsilon.split(",")):
            b = RenyiBudget(ra, eps)
            ok = laplace_defined(ScoreQuantizer(a.bins, a.s_lo, a.s_hi), a.n, b)
            print(f"{ra},{eps},{int(ok)},{smallest_n(a.bins, a.s_lo, a.s_hi, b)},"
                  f"{largest_bins(a.n, a.s_lo, a.s_hi, b)}")
