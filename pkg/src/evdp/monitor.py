"""Anytime-valid private risk monitoring over a stream of bounded losses.

Losses are scored in fixed-size batches. Each full batch gets a fresh
one-sided mean e-value against ``mean loss <= safety_threshold``, which is
privatized and multiplied into a running product. Batches use disjoint data,
so the running product is an e-process and the alarm at 1/alpha controls the
false-alarm probability over the whole stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import DomainError
from .evalues import privatize
from .mean import (DEFAULT_ATOMS, BettingPrior, evalue, log_sensitivity_bound,
                   make_one_sided_prior, new_state, update_many)
from .mechanisms import NoiseSpec, calibrate_rdp
from .privacy import BudgetLedger, RenyiBudget


def alarm_threshold(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return 1 / alpha


@dataclass(frozen=True)
class MonitorConfig:
    safety_threshold: float
    budget: RenyiBudget = RenyiBudget(2.0, 0.05)
    alpha: float = 0.05
    batch_size: int = 128
    c: float = 0.2
    mechanism: str = "gaussian"
    K: int = DEFAULT_ATOMS

    def __post_init__(self):
        if not 0 < self.safety_threshold < 1:
            raise DomainError(f"safety threshold must lie in (0, 1), got {self.safety_threshold}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise DomainError(f"batch size must be a positive integer, got {self.batch_size!r}")
        if not 0 < self.c < 1:
            raise DomainError(f"c must lie in (0, 1), got {self.c}")
        if not isinstance(self.budget, RenyiBudget):
            raise DomainError("monitor budget must be a RenyiBudget")


@lru_cache(maxsize=64)
def batch_mechanism(config: MonitorConfig) -> tuple[BettingPrior, NoiseSpec]:
    """Prior and calibrated noise shared by every batch of a monitor."""
    prior = make_one_sided_prior(config.c, config.safety_threshold, config.K)
    sens = log_sensitivity_bound(prior, config.safety_threshold)
    return prior, calibrate_rdp(config.mechanism, sens, config.budget)


@dataclass(frozen=True)
class BatchRecord:
    batch_index: int
    private_log_e: float
    cumulative_log_e: float
    alarmed: bool


@dataclass(frozen=True)
class MonitorState:
    alpha: float = 0.05
    renyi_alpha: float = 2.0
    cumulative_log_e: float = 0.0
    batches_seen: int = 0
    alarmed: bool = False
    alarm_batch: Optional[int] = None
    pending: tuple[float, ...] = ()
    ledger: BudgetLedger = None
    history: tuple[BatchRecord, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.ledger is None:
            object.__setattr__(self, "ledger", BudgetLedger(self.renyi_alpha))


def initial_state(config: MonitorConfig) -> MonitorState:
    return MonitorState(alpha=config.alpha, renyi_alpha=config.budget.alpha)


def absorb(state: MonitorState, private_log_e: float, config: MonitorConfig,
           charge: bool = True) -> MonitorState:
    """Multiply one released batch e-value into the running product."""
    cum = state.cumulative_log_e + float(private_log_e)
    batch = state.batches_seen + 1
    crossed = cum >= -math.log(config.alpha)
    alarmed = state.alarmed or crossed
    alarm_batch = state.alarm_batch if state.alarmed else (batch if crossed else None)
    ledger = state.ledger.compose(f"batch[{batch}]", config.budget) if charge else state.ledger
    rec = BatchRecord(batch, float(private_log_e), cum, alarmed)
    return MonitorState(state.alpha, state.renyi_alpha, cum, batch, alarmed, alarm_batch,
                        state.pending, ledger, state.history + (rec,))


def ingest(state: MonitorState, losses, config: MonitorConfig,
           rng: np.random.Generator) -> MonitorState:
    """Buffer losses and score every completed batch. Partial batches wait."""
    losses = np.asarray(losses, dtype=float).ravel()
    bad = np.flatnonzero(~((losses >= 0) & (losses <= 1)))
    if bad.size:
        raise DomainError(f"loss {int(bad[0])} = {losses[bad[0]]!r} is outside [0, 1]")
    buf = np.concatenate([np.asarray(state.pending, dtype=float), losses])
    prior, spec = batch_mechanism(config)
    charge = spec.budget is not None
    m = config.batch_size
    full = buf.size // m
    for b in range(full):
        batch = buf[b * m:(b + 1) * m]
        e = evalue(update_many(new_state(prior, config.safety_threshold), batch))
        rel = privatize(e, spec, rng)
        state = absorb(state, rel.log_value, config, charge)
    rest = tuple(float(x) for x in buf[full * m:])
    return replace(state, pending=rest)
