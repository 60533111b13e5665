"""Confidence sets for a bounded mean from a partition of candidate means.

Each cell [a_{j-1}, a_j] is tested at its midpoint. The cell e-value is
deflated by exp(-L_j * width_j), where L_j bounds how fast log E_theta moves
with theta, so the deflated value is an e-value for every theta in the cell.
A cell stays in the set unless its (deflated, possibly privatized) e-value
exceeds 1/alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, MechanismUndefined
from .evalues import EValue, PrivateEValue, privatize
from .mean import (DEFAULT_ATOMS, BettingPrior, lipschitz_bound, log_evalue,
                   log_sensitivity_bound, make_uniform_prior, new_state, update_many)
from .mechanisms import calibrate_rdp
from .privacy import BudgetLedger, LogSensitivity, RenyiBudget, split_budget

DEFAULT_EDGE_MARGIN = 1e-3


@dataclass(frozen=True, eq=False)
class Partition:
    cuts: np.ndarray

    def __post_init__(self):
        cuts = np.array(self.cuts, dtype=float)
        if cuts.ndim != 1 or cuts.size < 2:
            raise DomainError("a partition needs at least two cut points")
        if not np.all(np.isfinite(cuts)) or np.any(np.diff(cuts) <= 0):
            raise DomainError("partition cuts must be finite and strictly increasing")
        cuts.setflags(write=False)
        object.__setattr__(self, "cuts", cuts)

    @classmethod
    def uniform(cls, k: int, lo: float = DEFAULT_EDGE_MARGIN,
                hi: float = 1 - DEFAULT_EDGE_MARGIN) -> "Partition":
        if int(k) != k or k < 1:
            raise DomainError(f"k must be a positive integer, got {k!r}")
        return cls(np.linspace(lo, hi, int(k) + 1))

    @property
    def k(self) -> int:
        return self.cuts.size - 1

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.cuts[:-1] + self.cuts[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.cuts)

    def cell(self, j: int) -> tuple[float, float]:
        return float(self.cuts[j]), float(self.cuts[j + 1])


@dataclass(frozen=True)
class CellEValue:
    """One cell's evidence. Indices are 0-based.

    ``released`` is the privatized deflated value when the cell was released
    under a mechanism; the inclusion decision uses it when present.
    """

    index: int
    raw: EValue
    deflated: EValue
    lipschitz: float
    released: Optional[PrivateEValue] = None

    @property
    def decision_log_value(self) -> float:
        return (self.released if self.released is not None else self.deflated).log_value


@dataclass(frozen=True)
class ConfidenceSet:
    partition: Partition
    cells: tuple[int, ...]
    cell_values: tuple[CellEValue, ...] = ()

    def __post_init__(self):
        cells = tuple(sorted(int(c) for c in self.cells))
        if len(set(cells)) != len(cells) or any(not 0 <= c < self.partition.k for c in cells):
            raise DomainError("included cells must be distinct indices within the partition")
        object.__setattr__(self, "cells", cells)

    @property
    def empty(self) -> bool:
        """Flag for an empty set. Empty sets are legal and returned as-is."""
        return not self.cells

    @property
    def intervals(self) -> list[tuple[float, float]]:
        """Included cells merged into maximal closed intervals."""
        out: list[tuple[float, float]] = []
        prev = None
        for j in self.cells:
            lo, hi = self.partition.cell(j)
            if prev is not None and j == prev + 1:
                out[-1] = (out[-1][0], hi)
            else:
                out.append((lo, hi))
            prev = j
        return out

    @property
    def width(self) -> float:
        return float(self.partition.widths[list(self.cells)].sum()) if self.cells else 0.0

    @property
    def hull(self) -> Optional[tuple[float, float]]:
        iv = self.intervals
        return (iv[0][0], iv[-1][1]) if iv else None

    def contains(self, theta: float) -> bool:
        return any(lo <= theta <= hi for lo, hi in self.intervals)


@dataclass(frozen=True)
class PriorConfig:
    """Uniform betting prior on [lambda_inf, lambda_sup], rebuilt at each cell midpoint."""

    lambda_inf: float = -1.0
    lambda_sup: float = 1.0
    K: int = DEFAULT_ATOMS

    def build(self, theta: float) -> BettingPrior:
        return make_uniform_prior(self.lambda_inf, self.lambda_sup, self.K, theta)


def deflate(raw: EValue, L: float, width: float) -> EValue:
    """raw * exp(-L * width)."""
    if not L >= 0:
        raise DomainError(f"Lipschitz constant must be >= 0, got {L}")
    if not width > 0:
        raise DomainError(f"cell width must be positive, got {width}")
    return EValue(raw.log_value - L * width)


def build_ci(cells: Sequence[CellEValue], alpha: float, partition: Partition) -> ConfidenceSet:
    """Keep cell j iff its e-value is <= 1/alpha."""
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    idx = sorted(c.index for c in cells)
    if idx != list(range(partition.k)):
        raise DomainError("cells must cover every partition index exactly once")
    log_thr = -math.log(alpha)
    keep = tuple(c.index for c in cells if c.decision_log_value <= log_thr)
    return ConfidenceSet(partition, keep, tuple(sorted(cells, key=lambda c: c.index)))


def _cell_parts(data: np.ndarray, partition: Partition, prior_config: PriorConfig, j: int):
    lo, hi = partition.cell(j)
    theta = 0.5 * (lo + hi)
    prior = prior_config.build(theta)
    per_obs = lipschitz_bound(prior, lo, hi)
    L = data.size * per_obs
    raw = EValue(log_evalue(update_many(new_state(prior, theta), data)))
    return prior, theta, per_obs, L, raw, deflate(raw, L, hi - lo)


def _as_data(data) -> np.ndarray:
    data = np.asarray(data, dtype=float).ravel()
    if data.size == 0:
        raise DomainError("data must be nonempty")
    return data


def nonprivate_ci(data, partition: Partition, prior_config: PriorConfig = PriorConfig(),
                  alpha: float = 0.05) -> ConfidenceSet:
    data = _as_data(data)
    cells = []
    for j in range(partition.k):
        _, _, _, L, raw, defl = _cell_parts(data, partition, prior_config, j)
        cells.append(CellEValue(j, raw, defl, L))
    return build_ci(cells, alpha, partition)


def deflated_sensitivity(prior: BettingPrior, theta: float, per_obs_lipschitz: float,
                         width: float) -> LogSensitivity:
    """Log-sensitivity of the deflated cell e-value.

    The deflation exponent is n * l * width, and neighbouring datasets differ
    in n by one, so the bound for the raw e-value grows by l * width.
    """
    return LogSensitivity(log_sensitivity_bound(prior, theta).value + per_obs_lipschitz * width)


def private_ci(data, partition: Partition, prior_config: PriorConfig, budget: RenyiBudget,
               mechanism: str, alpha: float,
               rng: np.random.Generator) -> tuple[ConfidenceSet, BudgetLedger]:
    """Release every cell at budget eps/k, then threshold.

    The ledger records one entry per private cell release, so a complete run
    spends exactly ``budget.epsilon``. A non-private identity passthrough
    (identity mechanism with nonzero sensitivity) records nothing.
    """
    data = _as_data(data)
    per_cell = split_budget(budget, partition.k)
    ledger = BudgetLedger(budget.alpha)
    cells = []
    for j in range(partition.k):
        prior, theta, per_obs, L, raw, defl = _cell_parts(data, partition, prior_config, j)
        sens = deflated_sensitivity(prior, theta, per_obs, float(partition.widths[j]))
        try:
            spec = calibrate_rdp(mechanism, sens, per_cell)
        except MechanismUndefined as exc:
            raise MechanismUndefined(f"cell {j} (theta={theta:.6g}): {exc}") from None
        rel = privatize(defl, spec, rng)
        if spec.budget is not None:
            ledger = ledger.compose(f"cell[{j}]", per_cell)
        cells.append(CellEValue(j, raw, defl, L, rel))
    return build_ci(cells, alpha, partition), ledger
