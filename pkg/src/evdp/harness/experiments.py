"""Experiment drivers behind the ``ci``, ``monitor`` and ``conformal`` commands.

Each driver takes a dataclass config and a root seed and returns result rows
in a deterministic order. Writing files is left to the CLI.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from ..confidence import Partition, PriorConfig, nonprivate_ci, private_ci
from ..conformal import CalibrationScores, ScoreQuantizer, include_matrix, privatize_levels
from ..errors import MechanismUndefined
from ..monitor import MonitorConfig, ingest, initial_state
from ..privacy import RenyiBudget
from .csvio import read_column, read_rows
from .streams import substream
from .synthetic import ClassifierSim, bernoulli, changepoint

NA = float("nan")


def _pool_map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _combos(renyi_alphas, epsilons, mechanisms):
    return list(product(renyi_alphas, epsilons, mechanisms))


@dataclass(frozen=True)
class CIRun:
    ns: tuple[int, ...] = (1000, 10000)
    alpha: float = 0.05
    renyi_alphas: tuple[float, ...] = (2.0,)
    epsilons: tuple[float, ...] = (1.0, 10.0)
    mechanisms: tuple[str, ...] = ("gaussian", "laplace")
    cells: int = 50
    atoms: int = 101
    p: float = 0.3
    reps: int = 1
    data: Optional[str] = None
    jobs: int = 1


CI_HEADER = ("n", "rep", "alpha", "renyi_alpha", "epsilon", "mechanism", "status",
             "lower", "upper", "width", "pieces", "covers")
CI_DOC = ("n: sample size; rep: repetition; alpha: significance level; renyi_alpha, epsilon: "
          "Renyi budget (NA when non-private); mechanism; status: ok | empty | N/A (mechanism "
          "undefined); lower, upper: hull of the set; width: total length of included cells; "
          "pieces: number of disjoint intervals; covers: 1 if the set contains the generating "
          "mean (NA for CSV input)")


def _ci_rep(args):
    cfg, seed, rep = args
    if cfg.data is not None:
        full = read_column(cfg.data, "y")
        sets = [(full.size, full, NA)]
    else:
        sets = []
        for n in cfg.ns:
            sets.append((n, bernoulli(cfg.p, n, substream(seed, "data", rep, n)), cfg.p))
    part = Partition.uniform(cfg.cells)
    prior = PriorConfig(-1.0, 1.0, cfg.atoms)
    rows = []

    def row(n, ra, eps, mech, cs):
        if cs is None:
            return (n, rep, cfg.alpha, ra, eps, mech, "N/A", NA, NA, NA, 0, NA)
        hull = cs.hull or (NA, NA)
        covers = NA if math.isnan(truth) else int(cs.contains(truth))
        return (n, rep, cfg.alpha, ra, eps, mech, "empty" if cs.empty else "ok",
                hull[0], hull[1], cs.width, len(cs.intervals), covers)

    for n, y, truth in sets:
        rows.append(row(n, NA, NA, "nonprivate", nonprivate_ci(y, part, prior, cfg.alpha)))
        for c, (ra, eps, mech) in enumerate(_combos(cfg.renyi_alphas, cfg.epsilons, cfg.mechanisms)):
            rng = substream(seed, "ci", rep, n, c)
            try:
                cs, _ = private_ci(y, part, prior, RenyiBudget(ra, eps), mech, cfg.alpha, rng)
            except MechanismUndefined:
                cs = None
            rows.append(row(n, ra, eps, mech, cs))
    return rows


def run_ci(cfg: CIRun, seed: int) -> list[tuple]:
    out = _pool_map(_ci_rep, [(cfg, seed, r) for r in range(cfg.reps)], cfg.jobs)
    return [r for rows in out for r in rows]


@dataclass(frozen=True)
class MonitorRun:
    threshold: float = 0.5
    shift: float = 0.1
    change_batch: int = 20
    batches: int = 50
    batch_size: int = 128
    alpha: float = 0.05
    renyi_alphas: tuple[float, ...] = (2.0,)
    epsilons: tuple[float, ...] = (0.05,)
    mechanisms: tuple[str, ...] = ("gaussian",)
    c: float = 0.2
    atoms: int = 101
    reps: int = 1
    data: Optional[str] = None
    jobs: int = 1


MONITOR_HEADER = ("rep", "renyi_alpha", "epsilon", "mechanism", "batch_index",
                  "private_log_e", "cumulative_log_e", "alarmed")
MONITOR_DOC = ("rep: repetition; renyi_alpha, epsilon: per-batch Renyi budget (NA when "
               "non-private); mechanism; batch_index: 1-based batch; private_log_e: released log "
               "e-value of this batch; cumulative_log_e: log of the running product; alarmed: 1 "
               "once the running product has reached 1/alpha")


def monitor_losses(cfg: MonitorRun, seed: int, rep: int) -> np.ndarray:
    if cfg.data is not None:
        return read_column(cfg.data, "loss")
    n = cfg.batches * cfg.batch_size
    t = (cfg.change_batch - 1) * cfg.batch_size
    after = min(1.0, cfg.threshold + cfg.shift)
    return changepoint(cfg.threshold, after, min(t, n), n, substream(seed, "data", rep))


def _monitor_rep(args):
    cfg, seed, rep = args
    losses = monitor_losses(cfg, seed, rep)
    combos = [(NA, NA, "nonprivate")] + _combos(cfg.renyi_alphas, cfg.epsilons, cfg.mechanisms)
    rows = []
    for c, (ra, eps, mech) in enumerate(combos):
        budget = RenyiBudget(2.0 if mech == "nonprivate" else ra, 1.0 if mech == "nonprivate" else eps)
        mc = MonitorConfig(cfg.threshold, budget, cfg.alpha, cfg.batch_size, cfg.c,
                           "identity" if mech == "nonprivate" else mech, cfg.atoms)
        state = ingest(initial_state(mc), losses, mc, substream(seed, "monitor", rep, c))
        for h in state.history:
            rows.append((rep, ra, eps, mech, h.batch_index, h.private_log_e,
                         h.cumulative_log_e, h.alarmed))
    return rows


def run_monitor(cfg: MonitorRun, seed: int) -> list[tuple]:
    out = _pool_map(_monitor_rep, [(cfg, seed, r) for r in range(cfg.reps)], cfg.jobs)
    return [r for rows in out for r in rows]


@dataclass(frozen=True)
class ConformalRun:
    n: int = 1000
    test_n: int = 500
    bins: int = 50
    s_lo: float = 1.0
    s_hi: float = 100.0
    alpha: float = 0.1
    renyi_alphas: tuple[float, ...] = (2.0,)
    epsilons: tuple[float, ...] = (0.1, 1.0)
    mechanisms: tuple[str, ...] = ("gaussian", "laplace")
    classes: int = 2
    signal: float = 2.0
    reps: int = 1
    calibration: Optional[str] = None
    candidates: Optional[str] = None
    jobs: int = 1


CONFORMAL_HEADER = ("rep", "renyi_alpha", "epsilon", "mechanism", "status", "avg_size",
                    "coverage", "empty_fraction")
CONFORMAL_DOC = ("rep: repetition; renyi_alpha, epsilon: total Renyi budget split over the bins "
                 "(NA when non-private); mechanism; status: ok | N/A (mechanism undefined at "
                 "eps/bins); avg_size: mean prediction-set size after the empty-to-singleton fix; "
                 "coverage: fraction of test points whose true label is included (NA for CSV "
                 "candidates); empty_fraction: fraction of sets empty before the fix")

PREDICTION_HEADER = ("id", "label", "included")


def _candidate_table(cfg: ConformalRun, seed: int, rep: int):
    """(ids, labels, score matrix, true label index or None)."""
    if cfg.candidates is None:
        sim = ClassifierSim(cfg.classes, cfg.signal, cfg.s_lo, cfg.s_hi)
        scores, y = sim.candidates(cfg.test_n, substream(seed, "data", rep, 1))
        return (np.arange(cfg.test_n), list(range(cfg.classes)), scores, y)
    rows = read_rows(cfg.candidates)
    ids = sorted({r["id"] for r in rows}, key=_natural)
    labels = sorted({r["label"] for r in rows}, key=_natural)
    col = {lbl: j for j, lbl in enumerate(labels)}
    row_of = {i: k for k, i in enumerate(ids)}
    scores = np.full((len(ids), len(labels)), np.nan)
    for r in rows:
        scores[row_of[r["id"]], col[r["label"]]] = float(r["score"])
    return ids, labels, scores, None


def _natural(s: str):
    try:
        return (0, float(s), s)
    except ValueError:
        return (1, 0.0, s)


def conformal_calibration(cfg: ConformalRun, seed: int, rep: int) -> np.ndarray:
    if cfg.calibration is not None:
        return read_column(cfg.calibration, "score")
    sim = ClassifierSim(cfg.classes, cfg.signal, cfg.s_lo, cfg.s_hi)
    return sim.calibration(cfg.n, substream(seed, "data", rep, 0))


def _conformal_rep(args):
    cfg, seed, rep = args
    q = ScoreQuantizer(cfg.bins, cfg.s_lo, cfg.s_hi)
    cal = CalibrationScores.from_raw(conformal_calibration(cfg, seed, rep), q)
    ids, labels, scores, truth = _candidate_table(cfg, seed, rep)
    combos = [(NA, NA, "nonprivate")] + _combos(cfg.renyi_alphas, cfg.epsilons, cfg.mechanisms)
    rows, predictions = [], {}
    for c, (ra, eps, mech) in enumerate(combos):
        rng = substream(seed, "conformal", rep, c)
        budget = RenyiBudget(2.0, 1.0) if mech == "nonprivate" else RenyiBudget(ra, eps)
        try:
            levels = privatize_levels(cal, q, budget, "identity" if mech == "nonprivate" else mech, rng)
        except MechanismUndefined:
            rows.append((rep, ra, eps, mech, "N/A", NA, NA, NA))
            continue
        inc, empty = _include_partial(levels, scores, cfg.alpha)
        cov = NA if truth is None else float(inc[np.arange(len(truth)), truth].mean())
        rows.append((rep, ra, eps, mech, "ok", float(inc.sum(axis=1).mean()), cov,
                     float(empty.mean())))
        predictions[(ra, eps, mech)] = [(i, lbl, bool(inc[k, j]))
                                        for k, i in enumerate(ids)
                                        for j, lbl in enumerate(labels)
                                        if not np.isnan(scores[k, j])]
    return rows, predictions


def _include_partial(levels, scores, alpha):
    """include_matrix that tolerates missing (NaN) candidate cells."""
    if not np.isnan(scores).any():
        return include_matrix(levels, scores, alpha, empty_to_singleton=True)
    filled = np.where(np.isnan(scores), levels.quantizer.s_hi, scores)
    lv = levels.log_values[levels.quantizer.index(filled.ravel())].reshape(scores.shape)
    lv = np.where(np.isnan(scores), np.inf, lv)
    inc = lv < -math.log(alpha)
    empty = ~inc.any(axis=1)
    rows = np.flatnonzero(empty)
    inc[rows, np.argmin(lv[rows], axis=1)] = True
    return inc, empty


def run_conformal(cfg: ConformalRun, seed: int):
    """Summary rows, plus predictions of the first repetition keyed by (renyi_alpha, eps, mechanism)."""
    out = _pool_map(_conformal_rep, [(cfg, seed, r) for r in range(cfg.reps)], cfg.jobs)
    rows = [r for rs, _ in out for r in rs]
    return rows, out[0][1] if out else {}
