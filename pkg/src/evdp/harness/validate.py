"""Registry of invariant checks run by ``evdp validate``.

Every check returns ``(passed, observed)``, where ``observed`` is a short
string with the measured quantity. Checks draw randomness only from
``substream(seed, "validate", check_index, ...)``.
"""

from __future__ import annotations

import contextlib
import io
import math
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, TextIO

import numpy as np

from ..confidence import (CellEValue, Partition, PriorConfig, build_ci, deflated_sensitivity,
                          nonprivate_ci, private_ci)
from ..conformal import (CalibrationScores, ScoreQuantizer, exch_evalue, exch_sensitivity,
                         predict_set, privatize_levels)
from ..evalues import EValue, PrivateEValue, average, continue_product, e_to_p, privatize
from ..mean import (BettingPrior, betting_fraction, evalue, lipschitz_bound, log_evalue,
                    log_sensitivity_bound, make_uniform_prior, new_state, update, update_many)
from ..mechanisms import (calibrate_rdp, h_alpha, invert_h_alpha, mgf_at_minus_one,
                          sample_noise, zero_bias)
from ..monitor import MonitorConfig, ingest, initial_state
from ..privacy import (BudgetLedger, RenyiBudget, rdp_to_approx_dp, renyi_divergence_gaussian,
                       renyi_divergence_laplace)
from .csvio import read_rows, write_csv
from .grids import full_grid, mc_grid
from .streams import substream

MC_DRAWS = 10**6

EXPECTED_COUNTS = {"privacy_core": 4, "mechanisms": 5, "evalue_core": 5, "mean_evalue": 6,
                   "confidence": 4, "monitor": 4, "conformal": 4, "harness": 3}


@dataclass(frozen=True)
class Context:
    seed: int
    inject_zero_bias: bool = False

    def rng(self, idx: int, *keys: int) -> np.random.Generator:
        return substream(self.seed, "validate", idx, *keys)

    def grid(self, mc: bool):
        g = mc_grid() if mc else full_grid()
        if self.inject_zero_bias:
            g = [replace(x, spec=zero_bias(x.spec)) for x in g]
        return g


@dataclass(frozen=True)
class Check:
    module: str
    prop: str
    fn: Callable[[Context, int], tuple[bool, str]]


@dataclass(frozen=True)
class Result:
    module: str
    prop: str
    passed: bool
    observed: str
    seconds: float


REGISTRY: list[Check] = []


def check(module: str, prop: str):
    def deco(fn):
        REGISTRY.append(Check(module, prop, fn))
        return fn
    return deco


def mc_mean_exp_neg(spec, rng, draws: int = MC_DRAWS) -> tuple[float, float]:
    """Monte Carlo mean of exp(-xi) and its standard error."""
    v = np.exp(-sample_noise(spec, rng, size=draws))
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(draws))


def binom_se(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


# privacy_core

@check("privacy_core", "Laplace divergence nondecreasing in |shift|")
def _laplace_monotone(ctx, idx):
    worst = 0.0
    for a in (1.5, 2.0, 10.0, 50.0):
        for b in (0.01, 0.1, 1.0, 5.0):
            d = [renyi_divergence_laplace(s, b, a) for s in np.linspace(0, 20 * b, 401)]
            worst = min(worst, float(np.min(np.diff(d))))
    return worst >= 0, f"min step {worst:.3g}"


@check("privacy_core", "Gaussian divergence linear in alpha, quadratic in shift")
def _gauss_scaling(ctx, idx):
    rng = ctx.rng(idx)
    worst = 0.0
    for _ in range(1000):
        m, v, a = rng.uniform(0.01, 5), rng.uniform(0.01, 5), rng.uniform(1.01, 50)
        base = renyi_divergence_gaussian(m, v, a)
        worst = max(worst, abs(renyi_divergence_gaussian(m, v, 2 * a) / (2 * base) - 1),
                    abs(renyi_divergence_gaussian(3 * m, v, a) / (9 * base) - 1))
    # a few ulp: each side is a product of three rounded factors
    return worst <= 4 * 2.3e-16, f"max rel err {worst:.3g}"


@check("privacy_core", "ledger composition order-independent")
def _ledger_order(ctx, idx):
    rng = ctx.rng(idx)
    bad = 0
    for _ in range(200):
        eps = rng.uniform(1e-3, 5, size=rng.integers(1, 30))
        spent = []
        for _ in range(3):
            led = BudgetLedger(2.0)
            for e in rng.permutation(eps):
                led = led.compose("x", RenyiBudget(2.0, float(e)))
            spent.append(led.spent)
        halves = BudgetLedger(2.0, tuple(("x", float(e)) for e in eps[: len(eps) // 2]))
        for e in eps[len(eps) // 2:]:
            halves = halves.compose("x", RenyiBudget(2.0, float(e)))
        spent.append(halves.spent)
        bad += len(set(spent)) != 1
    return bad == 0, f"{bad} mismatches in 200 trials"


@check("privacy_core", "RDP conversion tends to eps from above as delta -> 1")
def _rdp_conversion(ctx, idx):
    b = RenyiBudget(3.0, 0.7)
    deltas = 1 - np.logspace(-1, -12, 12)
    eps = [rdp_to_approx_dp(b, float(d)).epsilon for d in deltas]
    ok = all(e > b.epsilon for e in eps) and all(np.diff(eps) <= 0) and eps[-1] - b.epsilon < 1e-11
    return ok, f"eps' at delta=1-1e-12: {eps[-1]!r}"


# mechanisms

@check("mechanisms", "closed-form MGF at -1 <= 1 + 1e-12")
def _mgf(ctx, idx):
    g = ctx.grid(mc=False)
    worst = max(mgf_at_minus_one(x.spec) for x in g)
    return worst <= 1 + 1e-12, f"max {worst!r} over {len(g)} specs"


@check("mechanisms", "divergence at shift = sensitivity equals eps")
def _tight(ctx, idx):
    worst = 0.0
    for x in full_grid():
        if x.kind == "gaussian":
            d = renyi_divergence_gaussian(x.sensitivity, x.spec.variance, x.budget.alpha)
        else:
            d = renyi_divergence_laplace(x.sensitivity, x.spec.scale, x.budget.alpha)
        worst = max(worst, abs(d - x.budget.epsilon))
    return worst <= 1e-9, f"max abs err {worst:.3g}"


@check("mechanisms", "h_alpha inversion round-trips on [0, 100]")
def _h_roundtrip(ctx, idx):
    worst = 0.0
    for a in (2.0, 10.0, 50.0):
        for d in (0.01, 0.1):
            for t in np.linspace(0, 100, 401):
                t2 = invert_h_alpha(h_alpha(float(t), d, a), d, a)
                worst = max(worst, abs(t2 - t) / t if t > 0 else abs(t2))
    return worst <= 1e-9, f"max rel err {worst:.3g}"


@check("mechanisms", "Monte Carlo E[exp(-xi)] <= 1 + 4 SE")
def _mc_valid(ctx, idx):
    worst, n = -math.inf, 0
    for i, x in enumerate(ctx.grid(mc=True)):
        m, se = mc_mean_exp_neg(x.spec, ctx.rng(idx, i))
        worst = max(worst, (m - 1) / se)
        n += 1
    return worst <= 4, f"max z {worst:.3g} over {n} specs"


@check("mechanisms", "bias necessity: zero-bias spec exceeds 1 by > 3 SE")
def _bias_needed(ctx, idx):
    # negative control: the calibrated spec must pass, its zero-bias twin must fail
    worst_zero, worst_cal = math.inf, -math.inf
    for i, x in enumerate(ctx.grid(mc=True)):
        m0, se0 = mc_mean_exp_neg(zero_bias(x.spec), ctx.rng(idx, i, 0))
        m1, se1 = mc_mean_exp_neg(x.spec, ctx.rng(idx, i, 1))
        worst_zero = min(worst_zero, (m0 - 1) / se0)
        worst_cal = max(worst_cal, (m1 - 1) / se1)
    return worst_zero > 3 and worst_cal <= 4, \
        f"min zero-bias z {worst_zero:.3g}, max calibrated z {worst_cal:.3g}"


# evalue_core

@check("evalue_core", "privatized mean <= e (1 + 4 SE)")
def _priv_valid(ctx, idx):
    e = EValue.of(7.3)
    worst = -math.inf
    for i, x in enumerate(ctx.grid(mc=True)[::7]):
        rng = ctx.rng(idx, i)
        xi = sample_noise(x.spec, rng, size=MC_DRAWS)
        logs = e.log_value - xi
        # the vectorized values must be exactly what privatize releases
        for k in range(100):
            if privatize(e, x.spec, rng, noise=float(xi[k])).log_value != logs[k]:
                return False, "vectorized release differs from privatize"
        vals = np.exp(logs)
        se = vals.std(ddof=1) / math.sqrt(MC_DRAWS)
        worst = max(worst, (vals.mean() - e.value) / se)
    return worst <= 4, f"max z {worst:.3g}"


@check("evalue_core", "growth identity log(private) = log e - xi")
def _growth(ctx, idx):
    rng = ctx.rng(idx)
    spec = calibrate_rdp("gaussian", 0.3, RenyiBudget(2.0, 1.0))
    bad = 0
    for _ in range(1000):
        e = EValue(float(rng.normal(0, 20)))
        xi = float(sample_noise(spec, rng))
        n = int(rng.integers(1, 1000))
        pe = privatize(e, spec, rng, noise=xi)
        bad += pe.log_value / n != (e.log_value - xi) / n
    return bad == 0, f"{bad} mismatches"


@check("evalue_core", "continue_product associative, commutative; lineage +1 per fold")
def _product(ctx, idx):
    rng = ctx.rng(idx)
    b = RenyiBudget(2.0, 1.0)
    worst, bad_lineage = 0.0, 0
    for _ in range(1000):
        a, c, d = (PrivateEValue(float(v), b, "gaussian", ("r",)) for v in rng.normal(0, 5, 3))
        x = continue_product(continue_product(a, c), d)
        y = continue_product(a, continue_product(c, d))
        z = continue_product(d, continue_product(c, a))
        worst = max(worst, abs(x.log_value - y.log_value), abs(x.log_value - z.log_value))
        bad_lineage += len(x.lineage) != 5 or len(continue_product(a, c).lineage) != 3
    return worst <= 1e-12 and bad_lineage == 0, f"max log diff {worst:.3g}, lineage errors {bad_lineage}"


@check("evalue_core", "e_to_p nonincreasing in the e-value")
def _e_to_p(ctx, idx):
    vals = np.sort(np.concatenate([[1.0], ctx.rng(idx).lognormal(0, 5, 2000) + 1]))
    ps = [e_to_p(EValue.of(float(v))).value for v in vals]
    return bool(np.all(np.diff(ps) <= 0)), f"max step {float(np.max(np.diff(ps))):.3g}"


@check("evalue_core", "average lies between its inputs")
def _average(ctx, idx):
    rng = ctx.rng(idx)
    b = RenyiBudget(2.0, 1.0)
    bad = 0
    for _ in range(2000):
        x, y = rng.normal(0, 30, 2)
        eta = float(rng.choice([0.0, 1.0, rng.random()]))
        out = average(PrivateEValue(x, b, "g"), PrivateEValue(y, b, "g"), eta, bool(rng.random() < .5))
        bad += not min(x, y) <= out.log_value <= max(x, y)
    return bad == 0, f"{bad} violations"


# mean_evalue

def random_prior(rng, theta_lo: float, theta_hi: float, k_max: int = 16) -> BettingPrior:
    """A uniform-weight prior valid for every theta in [theta_lo, theta_hi]."""
    lim_lo = -1 / (1 - theta_lo)
    lim_hi = 1 / theta_hi
    lo = rng.uniform(0.999 * lim_lo, 0)
    hi = rng.uniform(0, 0.999 * lim_hi)
    k = int(rng.integers(1, k_max + 1))
    atoms = rng.uniform(lo, hi, k) if rng.random() < 0.5 else np.linspace(lo, hi, k)
    return BettingPrior(atoms, np.full(k, 1 / k), (lo, hi))


def sample_data(rng, n: int) -> np.ndarray:
    kind = rng.integers(3)
    if kind == 0:
        return (rng.random(n) < rng.random()).astype(float)
    if kind == 1:
        return rng.random(n)
    return rng.choice([0.0, 1.0, rng.random()], size=n)


def mixture_vs_product(rng, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        theta = rng.uniform(0.02, 0.98)
        prior = random_prior(rng, theta, theta)
        ys = sample_data(rng, int(rng.integers(0, 21)))
        st = new_state(prior, theta)
        log_prod = 0.0
        for y in ys:
            log_prod += math.log1p(betting_fraction(st) * (y - theta))
            st = update(st, y)
        worst = max(worst, abs(math.expm1(log_evalue(st) - log_prod)))
    return worst


def permutation_gap(rng, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        theta = rng.uniform(0.02, 0.98)
        prior = random_prior(rng, theta, theta)
        ys = sample_data(rng, int(rng.integers(1, 60)))
        a, b = new_state(prior, theta), new_state(prior, theta)
        for y in ys:
            a = update(a, y)
        for y in rng.permutation(ys):
            b = update(b, y)
        worst = max(worst, abs(evalue(a).value / evalue(b).value - 1))
    return worst


def mean_sensitivity_violations(rng, trials: int) -> tuple[int, float]:
    bad, ratio = 0, 0.0
    for _ in range(trials):
        theta = rng.uniform(0.02, 0.98)
        prior = random_prior(rng, theta, theta)
        ys = sample_data(rng, int(rng.integers(0, 40)))
        extra = float(rng.choice([0.0, 1.0, rng.random()]))
        bound = log_sensitivity_bound(prior, theta).value
        base = log_evalue(update_many(new_state(prior, theta), ys))
        if rng.random() < 0.5 or ys.size == 0:
            other = log_evalue(update_many(new_state(prior, theta), np.append(ys, extra)))
        else:
            other = log_evalue(update_many(new_state(prior, theta),
                                           np.delete(ys, rng.integers(ys.size))))
        gap = abs(other - base)
        bad += gap > bound * (1 + 1e-12) + 1e-14
        ratio = max(ratio, gap / bound if bound > 0 else 0.0)
    return bad, ratio


def lipschitz_violations(rng, trials: int, h: float = 1e-6) -> tuple[int, float]:
    bad, ratio = 0, 0.0
    for _ in range(trials):
        t_lo = rng.uniform(0.01, 0.9)
        t_hi = min(0.99, t_lo + rng.uniform(0.001, 0.3))
        prior = random_prior(rng, t_lo, t_hi)
        ys = sample_data(rng, int(rng.integers(1, 60)))
        theta = rng.uniform(t_lo, t_hi - h)
        f0 = log_evalue(update_many(new_state(prior, theta), ys))
        f1 = log_evalue(update_many(new_state(prior, theta + h), ys))
        slope = abs(f1 - f0) / h
        bound = lipschitz_bound(prior, t_lo, t_hi, n=ys.size)
        bad += slope > bound * (1 + 1e-6)
        ratio = max(ratio, slope / bound if bound > 0 else 0.0)
    return bad, ratio


@check("mean_evalue", "mixture equals predictable product form")
def _mix_prod(ctx, idx):
    worst = mixture_vs_product(ctx.rng(idx), 1000)
    return worst <= 1e-10, f"max rel err {worst:.3g}"


@check("mean_evalue", "permutation invariance")
def _perm(ctx, idx):
    worst = permutation_gap(ctx.rng(idx), 1000)
    return worst <= 1e-12, f"max rel diff {worst:.3g}"


@check("mean_evalue", "empirical log-sensitivity within bound")
def _mean_sens(ctx, idx):
    bad, ratio = mean_sensitivity_violations(ctx.rng(idx), 10_000)
    return bad == 0, f"{bad} violations in 10^4 pairs; max gap/bound {ratio:.3g}"


@check("mean_evalue", "finite-difference slope within Lipschitz bound")
def _lip(ctx, idx):
    bad, ratio = lipschitz_violations(ctx.rng(idx), 10_000)
    return bad == 0, f"{bad} violations in 10^4 checks; max slope/bound {ratio:.3g}"


def null_mean_evalue(rng, theta: float, n: int, reps: int, K: int = 101) -> tuple[float, float]:
    """Mean and SE of the e-value under Bernoulli(theta) data."""
    prior = make_uniform_prior(-1, 1, K, theta)
    # the e-value depends on Bernoulli data only through the number of ones
    ks = np.arange(n + 1)
    lw = np.outer(ks, np.log1p(prior.atoms * (1 - theta))) + \
        np.outer(n - ks, np.log1p(-prior.atoms * theta))
    m = lw.max(axis=1, keepdims=True)
    e_of_k = np.exp(m[:, 0]) * (np.exp(lw - m) @ prior.weights)
    vals = e_of_k[rng.binomial(n, theta, size=reps)]
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps))


@check("mean_evalue", "null validity E[E] <= 1 + 4 SE at n = 200")
def _null(ctx, idx):
    worst = -math.inf
    for i, theta in enumerate((0.1, 0.3, 0.5, 0.8)):
        m, se = null_mean_evalue(ctx.rng(idx, i), theta, 200, 10_000)
        worst = max(worst, (m - 1) / se)
    return worst <= 4, f"max z {worst:.3g}"


@check("mean_evalue", "empty state has e-value 1")
def _empty(ctx, idx):
    st = new_state(make_uniform_prior(-1, 1, 101, 0.4), 0.4)
    return log_evalue(st) == 0.0 and st.n == 0, f"log e = {log_evalue(st)!r}"


# confidence

@check("confidence", "nesting across significance levels")
def _nesting(ctx, idx):
    rng = ctx.rng(idx)
    bad = 0
    for _ in range(500):
        part = Partition.uniform(int(rng.integers(1, 30)))
        cells = [CellEValue(j, EValue(v), EValue(v), 0.0) for j, v in
                 enumerate(rng.normal(2, 3, part.k))]
        a1, a2 = np.sort(rng.uniform(0.001, 0.999, 2))
        bad += not set(build_ci(cells, a2, part).cells) <= set(build_ci(cells, a1, part).cells)
    return bad == 0, f"{bad} violations"


def ci_coverage(seed_rng: Callable[[int], np.random.Generator], reps: int, n: int = 2000,
                k: int = 20, p: float = 0.3, alpha: float = 0.05,
                budget: RenyiBudget = RenyiBudget(2.0, 1.0)) -> tuple[float, float]:
    part = Partition.uniform(k)
    prior = PriorConfig()
    hit_np = hit_p = 0
    for r in range(reps):
        rng = seed_rng(r)
        y = (rng.random(n) < p).astype(float)
        hit_np += nonprivate_ci(y, part, prior, alpha).contains(p)
        hit_p += private_ci(y, part, prior, budget, "gaussian", alpha, rng)[0].contains(p)
    return hit_np / reps, hit_p / reps


@check("confidence", "coverage >= 1 - alpha - 3 SE")
def _coverage(ctx, idx):
    reps = 200
    cov_np, cov_p = ci_coverage(lambda r: ctx.rng(idx, r), reps)
    floor = 0.95 - 3 * binom_se(0.95, reps)
    return min(cov_np, cov_p) >= floor, f"nonprivate {cov_np:.3f}, private {cov_p:.3f}, floor {floor:.3f}"


@check("confidence", "noised deflated cells have mean <= raw value")
def _widens(ctx, idx):
    rng = ctx.rng(idx)
    y = (rng.random(500) < 0.4).astype(float)
    part = Partition.uniform(10)
    per_cell = RenyiBudget(2.0, 1.0)
    worst, tested = -math.inf, 0
    for j in range(part.k):
        lo, hi = part.cell(j)
        theta = 0.5 * (lo + hi)
        prior = PriorConfig().build(theta)
        per_obs = lipschitz_bound(prior, lo, hi)
        spec = calibrate_rdp("gaussian", deflated_sensitivity(prior, theta, per_obs, hi - lo),
                             per_cell)
        if spec.variance > 2:
            # too heavy-tailed for a Monte Carlo mean; validity is the MGF check
            continue
        raw = log_evalue(update_many(new_state(prior, theta), y))
        defl = raw - y.size * per_obs * (hi - lo)
        v = np.exp(defl - raw - sample_noise(spec, rng, size=MC_DRAWS))
        worst = max(worst, (v.mean() - 1) / (v.std(ddof=1) / math.sqrt(MC_DRAWS)))
        tested += 1
    return tested > 0 and worst <= 4, f"max z of released/raw over {tested} cells: {worst:.3g}"


@check("confidence", "ledger spends exactly eps")
def _ci_ledger(ctx, idx):
    rng = ctx.rng(idx)
    y = (rng.random(300) < 0.5).astype(float)
    worst = 0.0
    for k, eps in ((50, 1.0), (20, 0.3), (7, 10.0)):
        _, led = private_ci(y, Partition.uniform(k), PriorConfig(), RenyiBudget(2.0, eps),
                            "gaussian", 0.05, rng)
        worst = max(worst, abs(led.spent - eps) / (k * eps * 2.3e-16))
    return worst <= 1, f"max error {worst:.3g} roundings per cell"


# monitor

def monitor_alarms(seed_rng, runs: int, threshold: float = 0.5, shift: float = 0.0,
                   change_batch: int = 20, batches: int = 50, batch_size: int = 128,
                   eps: float = 0.05, mechanism: str = "gaussian") -> np.ndarray:
    """Alarm batch per run (0 = never)."""
    cfg = MonitorConfig(threshold, RenyiBudget(2.0, eps), 0.05, batch_size, 0.2, mechanism)
    out = np.zeros(runs, dtype=int)
    for r in range(runs):
        rng = seed_rng(r)
        mu = np.full(batches, threshold)
        mu[change_batch - 1:] += shift
        losses = (rng.random((batches, batch_size)) < mu[:, None]).astype(float).ravel()
        st = ingest(initial_state(cfg), losses, cfg, rng)
        out[r] = st.alarm_batch or 0
    return out


@check("monitor", "false-alarm rate <= alpha + 3 SE")
def _monitor_null(ctx, idx):
    runs = 1000
    rate = float((monitor_alarms(lambda r: ctx.rng(idx, r), runs) > 0).mean())
    limit = 0.05 + 3 * binom_se(0.05, runs)
    return rate <= limit, f"rate {rate:.3f}, limit {limit:.3f}"


@check("monitor", "ledger at fixed order, one entry per batch")
def _monitor_ledger(ctx, idx):
    cfg = MonitorConfig(0.5, RenyiBudget(2.0, 0.05))
    rng = ctx.rng(idx)
    st = ingest(initial_state(cfg), (rng.random(128 * 7 + 5) < 0.5).astype(float), cfg, rng)
    ok = (st.ledger.alpha == 2.0 and len(st.ledger) == 7 and
          all(e == 0.05 for _, e in st.ledger.entries) and len(st.pending) == 5)
    return ok, f"{len(st.ledger)} entries, spent {st.ledger.spent!r}, pending {len(st.pending)}"


@check("monitor", "alarm latches; trajectory deterministic in seed")
def _monitor_latch(ctx, idx):
    cfg = MonitorConfig(0.3, RenyiBudget(2.0, 0.5))
    bad = 0
    for r in range(50):
        losses = (ctx.rng(idx, r, 0).random(128 * 30) < 0.4).astype(float)
        a = ingest(initial_state(cfg), losses, cfg, ctx.rng(idx, r, 1))
        b = ingest(initial_state(cfg), losses, cfg, ctx.rng(idx, r, 1))
        flags = [h.alarmed for h in a.history]
        bad += flags != sorted(flags)
        bad += [h.cumulative_log_e for h in a.history] != [h.cumulative_log_e for h in b.history]
    return bad == 0, f"{bad} violations in 50 runs"


@check("monitor", "power: identity alarms no later than Gaussian (median)")
def _monitor_power(ctx, idx):
    runs = 200
    never = 10**6
    med = {}
    for m in ("identity", "gaussian"):
        a = monitor_alarms(lambda r: ctx.rng(idx, r), runs, shift=0.1, mechanism=m)
        med[m] = float(np.median(np.where(a > 0, a, never)))
    return med["identity"] <= med["gaussian"], f"median alarm batch {med}"


# conformal

@check("conformal", "level e-values increase with score; included levels < 1/alpha")
def _conf_mono(ctx, idx):
    rng = ctx.rng(idx)
    q = ScoreQuantizer(50, 1, 100)
    cal = CalibrationScores(rng.choice(q.centers, 300))
    vals = [exch_evalue(cal, float(s)).value for s in q.centers]
    lv = privatize_levels(cal, q, RenyiBudget(2.0, 1.0), "identity", rng)
    ps = predict_set(lv, [(i, float(s)) for i, s in enumerate(q.centers)], 0.1)
    inc_ok = all(math.exp(lv.log_values[q.index([s])[0]]) < 10 for _, s in ps.included)
    ok = bool(np.all(np.diff(vals) > 0) and np.all(np.diff(lv.log_values) >= 0) and inc_ok)
    return ok, f"{ps.size} of {q.bins} levels included"


def exch_sensitivity_violations(rng, trials: int) -> tuple[int, float]:
    bad, ratio = 0, 0.0
    for _ in range(trials):
        a = rng.uniform(0.1, 10)
        b = a * rng.choice([1.0, rng.uniform(1, 3), rng.uniform(1, 200)])
        n = int(rng.integers(1, 200))
        pool = [a, b, rng.uniform(a, b)]
        cal = rng.choice(pool, n) if rng.random() < 0.5 else rng.uniform(a, b, n)
        s = float(rng.choice(pool))
        bound = exch_sensitivity(a, b, n).value
        base = exch_evalue(CalibrationScores(cal), s).log_value
        if rng.random() < 0.5 or n == 1:
            other = exch_evalue(CalibrationScores(np.append(cal, rng.choice(pool))), s).log_value
        else:
            other = exch_evalue(CalibrationScores(np.delete(cal, rng.integers(n))), s).log_value
        gap = abs(other - base)
        bad += gap > bound * (1 + 1e-12)
        ratio = max(ratio, gap / bound)
    return bad, ratio


@check("conformal", "empirical log-sensitivity within bound")
def _conf_sens(ctx, idx):
    bad, ratio = exch_sensitivity_violations(ctx.rng(idx), 10_000)
    return bad == 0, f"{bad} violations in 10^4 pairs; max gap/bound {ratio:.3g}"


def conformal_score_coverage(seed_rng, reps: int, mechanism: str, n: int = 1000, bins: int = 50,
                             alpha: float = 0.1, eps: float = 1.0, test_n: int = 200) -> float:
    """Coverage when calibration and test scores share a distribution over bin centers."""
    q = ScoreQuantizer(bins, 1, 100)
    w = np.exp(-np.linspace(0, 4, bins))
    w /= w.sum()
    hits = 0
    for r in range(reps):
        rng = seed_rng(r)
        cal = CalibrationScores(rng.choice(q.centers, n, p=w))
        lv = privatize_levels(cal, q, RenyiBudget(2.0, eps), mechanism, rng)
        test = rng.choice(bins, test_n, p=w)
        hits += int((lv.log_values[test] < -math.log(alpha)).sum())
    return hits / (reps * test_n)


@check("conformal", "marginal coverage >= 1 - alpha - 3 SE")
def _conf_cov(ctx, idx):
    reps, test_n = 100, 200
    floor = 0.9 - 3 * binom_se(0.9, reps * test_n)
    cov = {m: conformal_score_coverage(lambda r: ctx.rng(idx, r), reps, m, test_n=test_n)
           for m in ("identity", "gaussian")}
    return min(cov.values()) >= floor, f"coverage {cov}, floor {floor:.4f}"


@check("conformal", "ledger spends exactly eps")
def _conf_ledger(ctx, idx):
    rng = ctx.rng(idx)
    worst = 0.0
    for bins, eps in ((500, 0.5), (50, 1.0), (1, 0.1)):
        q = ScoreQuantizer(bins, 1, 100)
        cal = CalibrationScores(rng.choice(q.centers, 1000))
        lv = privatize_levels(cal, q, RenyiBudget(2.0, eps), "gaussian", rng)
        worst = max(worst, abs(lv.ledger.spent - eps) / (bins * eps * 2.3e-16))
    return worst <= 1, f"max error {worst:.3g} roundings per level"


# harness

def _tiny_runs(out: Path, seed: int) -> list[Path]:
    from .cli import main
    paths = []
    quiet = io.StringIO()
    for cmd, extra in (("ci", ["--n", "300", "--cells", "8", "--epsilon", "1,10"]),
                       ("monitor", ["--batches", "6", "--batch-size", "32", "--change-batch", "3"]),
                       ("conformal", ["--n", "200", "--test-n", "50", "--bins", "20"])):
        d = out / cmd
        with contextlib.redirect_stderr(quiet):
            code = main([cmd, "--seed", str(seed), "--out", str(d)] + extra)
        if code not in (0, 3):
            raise RuntimeError(f"{cmd} exited with {code}")
        paths += sorted(p for p in d.rglob("*") if p.is_file())
    return paths


@check("harness", "identical manifest and seed give identical outputs")
def _determinism(ctx, idx):
    from .cli import main
    with tempfile.TemporaryDirectory() as tmp:
        first = _tiny_runs(Path(tmp) / "a", ctx.seed)
        # replay the written manifests into a second directory
        for cmd in ("ci", "monitor", "conformal"):
            with contextlib.redirect_stderr(io.StringIO()):
                main([cmd, "--config", str(Path(tmp) / "a" / cmd / "manifest.txt"),
                      "--out", str(Path(tmp) / "b" / cmd)])
        diff = []
        for p in first:
            q = Path(tmp) / "b" / p.relative_to(Path(tmp) / "a")
            if p.name == "manifest.txt":
                continue
            if not q.exists() or q.read_bytes() != p.read_bytes():
                diff.append(str(p.relative_to(Path(tmp) / "a")))
    return not diff, f"{len(first)} files compared; differing: {diff or 'none'}"


@check("harness", "CSV columns documented; SVG re-renders from CSV")
def _docs(ctx, idx):
    from .render import RENDERERS
    problems = []
    with tempfile.TemporaryDirectory() as tmp:
        for p in _tiny_runs(Path(tmp), ctx.seed):
            if p.suffix == ".csv":
                lines = p.read_text(encoding="utf-8").splitlines()
                header = lines[1].split(",")
                if not lines[0].startswith("# ") or any(h not in lines[0] for h in header):
                    problems.append(p.name)
            if p.suffix == ".svg":
                again = p.with_name("rerender.svg")
                RENDERERS[p.stem](p.with_suffix(".csv"), again)
                if again.read_bytes() != p.read_bytes():
                    problems.append(p.name)
    return not problems, f"problems: {problems or 'none'}"


@check("harness", "registry covers every module invariant")
def _registry(ctx, idx):
    counts = {}
    for c in REGISTRY:
        counts[c.module] = counts.get(c.module, 0) + 1
    return counts == EXPECTED_COUNTS, f"{len(REGISTRY)} checks registered, expected {sum(EXPECTED_COUNTS.values())}"


def run_registry(seed: int, only: Optional[str] = None, inject_zero_bias: bool = False,
                 progress: Optional[TextIO] = None) -> list[Result]:
    ctx = Context(int(seed), inject_zero_bias)
    results = []
    for i, c in enumerate(REGISTRY):
        if only and only not in c.module and only not in c.prop:
            continue
        t0 = time.perf_counter()
        try:
            passed, observed = c.fn(ctx, i)
        except Exception as exc:  # a crashing check is a failing check
            passed, observed = False, f"raised {type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        results.append(Result(c.module, c.prop, bool(passed), observed, dt))
        if progress is not None:
            print(f"{'PASS' if passed else 'FAIL'} [{dt:6.1f}s] {c.module}: {c.prop} ({observed})",
                  file=progress, flush=True)
    return results


REPORT_HEADER = ("module", "property", "passed", "observed")
REPORT_DOC = ("module: package module; property: invariant checked; passed: 1 or 0; "
              "observed: measured quantity")


def write_report(path, results: list[Result]) -> Path:
    return write_csv(path, REPORT_DOC, REPORT_HEADER,
                     [(r.module, r.prop, r.passed, r.observed) for r in results])


def read_report(path) -> list[dict]:
    return read_rows(path)
