"""Private e-conformal prediction on quantized scores.

Scores live on B bin centers in [s_lo, s_hi]. The prediction set for a test
point only depends on the exchangeability e-value at each center, so the
release is one private e-value per center, each at budget eps/B. Building
prediction sets afterwards is post-processing and costs nothing further.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np

from .errors import DomainError, MechanismUndefined
from .evalues import EValue
from .mechanisms import NoiseSpec, calibrate_laplace_rdp, calibrate_rdp, sample_noise
from .privacy import BudgetLedger, LogSensitivity, RenyiBudget, split_budget


@dataclass(frozen=True, eq=False)
class ScoreQuantizer:
    bins: int
    s_lo: float
    s_hi: float

    def __post_init__(self):
        if int(self.bins) != self.bins or self.bins < 1:
            raise DomainError(f"bins must be a positive integer, got {self.bins!r}")
        if not 0 < self.s_lo < self.s_hi or not math.isfinite(self.s_hi):
            raise DomainError(f"need 0 < s_lo < s_hi < inf, got [{self.s_lo}, {self.s_hi}]")
        object.__setattr__(self, "bins", int(self.bins))

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.s_lo, self.s_hi, self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    @property
    def a(self) -> float:
        """Smallest attainable quantized score."""
        return float(self.centers[0])

    @property
    def b(self) -> float:
        return float(self.centers[-1])

    def index(self, scores) -> np.ndarray:
        """Bin index per score; a score on an inner edge goes to the lower bin."""
        s = np.atleast_1d(np.asarray(scores, dtype=float))
        bad = np.flatnonzero(~((s >= self.s_lo) & (s <= self.s_hi)))
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"score {i} = {s[i]!r} is outside [{self.s_lo}, {self.s_hi}]")
        return np.searchsorted(self.edges[1:-1], s, side="left")

    def quantize(self, scores) -> np.ndarray:
        return self.centers[self.index(scores)]


@dataclass(frozen=True, eq=False)
class CalibrationScores:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise DomainError("calibration set must be nonempty")
        if np.any(~(v > 0)) or not np.all(np.isfinite(v)):
            raise DomainError("calibration scores must be positive and finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_raw(cls, scores, quantizer: ScoreQuantizer) -> "CalibrationScores":
        return cls(quantizer.quantize(scores))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def total(self) -> float:
        return math.fsum(self.values)


def _log_exch(total: float, n: int, s_test) -> np.ndarray:
    s_test = np.asarray(s_test, dtype=float)
    return np.log((n + 1) * s_test) - np.log(total + s_test)


def exch_evalue(calib: CalibrationScores, s_test: float) -> EValue:
    """(n+1) s_test / (sum of calibration scores + s_test)."""
    if not s_test > 0:
        raise DomainError(f"test score must be positive, got {s_test}")
    return EValue(float(_log_exch(calib.total, calib.n, s_test)))


def exch_sensitivity(a: float, b: float, n: int) -> LogSensitivity:
    """Log-sensitivity bound 2 (b/a) / (n+1) for scores in [a, b]."""
    if not 0 < a <= b:
        raise DomainError(f"need 0 < a <= b, got a={a}, b={b}")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return LogSensitivity(2 * (b / a) / (int(n) + 1))


@dataclass(frozen=True, eq=False)
class PrivateLevelEValues:
    """One released log e-value per bin center, in center order."""

    quantizer: ScoreQuantizer
    log_values: np.ndarray
    level_budget: Optional[RenyiBudget]
    ledger: BudgetLedger
    mechanism: str

    def __post_init__(self):
        lv = np.array(self.log_values, dtype=float)
        if lv.shape != (self.quantizer.bins,):
            raise DomainError("need exactly one level e-value per bin")
        lv.setflags(write=False)
        object.__setattr__(self, "log_values", lv)


def level_mechanism(quantizer: ScoreQuantizer, n: int, budget: RenyiBudget,
                    mechanism: str) -> tuple[NoiseSpec, RenyiBudget]:
    level = split_budget(budget, quantizer.bins)
    sens = exch_sensitivity(quantizer.a, quantizer.b, n)
    return calibrate_rdp(mechanism, sens, level), level


def laplace_defined(quantizer: ScoreQuantizer, n: int, budget: RenyiBudget) -> bool:
    """Whether the biased Laplace exists at the per-level budget."""
    sens = exch_sensitivity(quantizer.a, quantizer.b, n)
    return calibrate_laplace_rdp(sens, split_budget(budget, quantizer.bins)) is not None


def privatize_levels(calib: CalibrationScores, quantizer: ScoreQuantizer, budget: RenyiBudget,
                     mechanism: str, rng: np.random.Generator) -> PrivateLevelEValues:
    """Release the exchangeability e-value at every bin center.

    Noise is drawn once here and reused for every later test point.
    """
    centers = quantizer.centers
    if np.any(calib.values < quantizer.s_lo) or np.any(calib.values > quantizer.s_hi):
        raise DomainError("calibration scores fall outside the quantizer range")
    try:
        spec, level = level_mechanism(quantizer, calib.n, budget, mechanism)
    except MechanismUndefined as exc:
        raise MechanismUndefined(f"per-level budget eps/{quantizer.bins}: {exc}") from None
    xi = sample_noise(spec, rng, size=centers.size)
    log_values = _log_exch(calib.total, calib.n, centers) - xi
    ledger = BudgetLedger(budget.alpha)
    if spec.budget is not None:
        for k in range(quantizer.bins):
            ledger = ledger.compose(f"level[{k}]", level)
    return PrivateLevelEValues(quantizer, log_values, spec.budget, ledger, spec.describe())


@dataclass(frozen=True)
class PredictionSet:
    """Included candidates; ``was_empty`` records emptiness before any singleton fix."""

    included: tuple[tuple[Hashable, float], ...]
    was_empty: bool

    @property
    def size(self) -> int:
        return len(self.included)

    @property
    def labels(self) -> tuple:
        return tuple(lbl for lbl, _ in self.included)


def predict_set(levels: PrivateLevelEValues, candidates: Sequence[tuple[Hashable, float]],
                alpha: float, empty_to_singleton: bool = False) -> PredictionSet:
    """Keep a candidate iff the e-value at its score's level is < 1/alpha."""
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not candidates:
        return PredictionSet((), True)
    scores = [float(s) for _, s in candidates]
    idx = levels.quantizer.index(scores)
    lv = levels.log_values[idx]
    keep = lv < -math.log(alpha)
    included = tuple((lbl, s) for (lbl, _), s, k in zip(candidates, scores, keep) if k)
    was_empty = not included
    if was_empty and empty_to_singleton:
        j = int(np.argmin(lv))
        included = ((candidates[j][0], scores[j]),)
    return PredictionSet(included, was_empty)


def include_matrix(levels: PrivateLevelEValues, scores, alpha: float,
                   empty_to_singleton: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`predict_set` for a (test points x labels) score matrix.

    Returns the boolean inclusion matrix and the per-row emptiness before any
    singleton fix.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    scores = np.asarray(scores, dtype=float)
    lv = levels.log_values[levels.quantizer.index(scores.ravel())].reshape(scores.shape)
    inc = lv < -math.log(alpha)
    empty = ~inc.any(axis=1)
    if empty_to_singleton and empty.any():
        rows = np.flatnonzero(empty)
        inc[rows, np.argmin(lv[rows], axis=1)] = True
    return inc, empty
