#!/usr/bin/env python3
"""False-alarm rate, detection rate and alarm lag of the private monitor by safety threshold.

This is the simulation behind the default synthetic threshold of 0.5.
"""

import argparse

import numpy as np

from evdp.harness.streams import substream
from evdp.harness.validate import monitor_alarms


def sweep(thresholds, runs: int, seed: int, eps: float):
    print("threshold,false_alarm,detected_by_50,median_nonprivate,median_gaussian,within_10")
    for i, th in enumerate(thresholds):
        alt = lambda r: substream(seed, "validate", 700, i, r)
        null = monitor_alarms(lambda r: substream(seed, "validate", 701, i, r), runs,
                              threshold=th, eps=eps)
        base = monitor_alarms(alt, runs, threshold=th, shift=0.1, mechanism="identity", eps=eps)
        priv = monitor_alarms(alt, runs, threshold=th, shift=0.1, eps=eps)
        never = 10**6
        close = (base > 0) & (priv > 0) & (priv - base <= 10)
        print(f"{th},{(null > 0).mean():.3f},{(priv > 0).mean():.3f},"
              f"{np.median(np.where(base > 0, base, never))},"
              f"{np.median(np.where(priv > 0, priv, never))},{close.mean():.3f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--thresholds", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8")
    ap.add_argument("--runs", type=int, default=300)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--epsilon", type=float, default=0.05)
    a = ap.parse_args()
    sweep([float(x) for x in a.thresholds.split(",")], a.runs, a.seed, a.epsilon)
