"""Privacy budgets, Renyi divergences of shifted noise, and budget accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetMismatch, DomainError


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class RenyiBudget:
    """(alpha, epsilon) Renyi-DP budget; epsilon in nats."""

    alpha: float
    epsilon: float

    def __post_init__(self):
        alpha = _finite("alpha", self.alpha)
        epsilon = _finite("epsilon", self.epsilon)
        if alpha <= 1:
            raise DomainError(f"Renyi order must exceed 1, got {alpha}")
        if epsilon <= 0:
            raise DomainError(f"epsilon must be positive, got {epsilon}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "epsilon", epsilon)


@dataclass(frozen=True)
class ApproxDPBudget:
    """(epsilon, delta) approximate-DP budget. delta = 0 is pure DP."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        epsilon = _finite("epsilon", self.epsilon)
        delta = _finite("delta", self.delta)
        if epsilon <= 0:
            raise DomainError(f"epsilon must be positive, got {epsilon}")
        if not 0 <= delta < 1:
            raise DomainError(f"delta must lie in [0, 1), got {delta}")
        object.__setattr__(self, "epsilon", epsilon)
        object.__setattr__(self, "delta", delta)


@dataclass(frozen=True)
class LogSensitivity:
    """Largest change of log E between neighbouring datasets."""

    value: float

    def __post_init__(self):
        value = _finite("log-sensitivity", self.value)
        if value < 0:
            raise DomainError(f"log-sensitivity must be >= 0, got {value}")
        object.__setattr__(self, "value", value)

    def __float__(self):
        return self.value


def as_log_sensitivity(sens) -> LogSensitivity:
    return sens if isinstance(sens, LogSensitivity) else LogSensitivity(sens)


@dataclass(frozen=True)
class BudgetLedger:
    """Audit trail of releases composed at one fixed Renyi order.

    Values are immutable; :meth:`compose` returns a new ledger.
    """

    alpha: float
    entries: tuple[tuple[str, float], ...] = field(default=())

    def __post_init__(self):
        alpha = _finite("alpha", self.alpha)
        if alpha <= 1:
            raise DomainError(f"Renyi order must exceed 1, got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "entries", tuple((str(l), float(e)) for l, e in self.entries))

    @property
    def spent(self) -> float:
        # fsum: k copies of eps/k add back to eps within one rounding
        return math.fsum(e for _, e in self.entries)

    def compose(self, label: str, budget: RenyiBudget) -> "BudgetLedger":
        return ledger_compose(self, label, budget)

    def __len__(self):
        return len(self.entries)


def ledger_compose(ledger: BudgetLedger, label: str, budget: RenyiBudget) -> BudgetLedger:
    """Record one (alpha, eps) release; additive composition at fixed alpha."""
    if not isinstance(budget, RenyiBudget):
        raise BudgetMismatch("ledger entries must be RenyiBudget releases")
    if budget.alpha != ledger.alpha:
        raise BudgetMismatch(
            f"cannot compose order {budget.alpha} into a ledger at order {ledger.alpha}"
        )
    return BudgetLedger(ledger.alpha, ledger.entries + ((label, budget.epsilon),))


def split_budget(budget: RenyiBudget, k: int) -> RenyiBudget:
    """Per-release budget when k releases must compose to ``budget``."""
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    return RenyiBudget(budget.alpha, budget.epsilon / int(k))


def rdp_to_approx_dp(budget: RenyiBudget, delta: float) -> ApproxDPBudget:
    """Convert (alpha, eps)-RDP to (eps + log(1/delta)/(alpha-1), delta)-DP."""
    delta = _finite("delta", delta)
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    return ApproxDPBudget(budget.epsilon + math.log(1 / delta) / (budget.alpha - 1), delta)


def renyi_divergence_gaussian(shift: float, variance: float, alpha: float) -> float:
    """D_alpha between two Gaussians of common variance whose means differ by ``shift``."""
    shift = _finite("shift", shift)
    variance = _finite("variance", variance)
    alpha = _finite("alpha", alpha)
    if variance <= 0:
        raise DomainError(f"variance must be positive, got {variance}")
    if alpha <= 1:
        raise DomainError(f"Renyi order must exceed 1, got {alpha}")
    return alpha * shift * shift / (2 * variance)


def renyi_divergence_laplace(shift: float, scale: float, alpha: float) -> float:
    """D_alpha between Laplace(0, b) and Laplace(shift, b).

    Evaluated as a log-sum-exp so that large ``(alpha-1)|shift|/b`` does not
    overflow.
    """
    shift = _finite("shift", shift)
    scale = _finite("scale", scale)
    alpha = _finite("alpha", alpha)
    if scale <= 0:
        raise DomainError(f"scale must be positive, got {scale}")
    if alpha <= 1:
        raise DomainError(f"Renyi order must exceed 1, got {alpha}")
    r = abs(shift) / scale
    log_norm = math.log(2 * alpha - 1)
    log_mix = np.logaddexp(
        math.log(alpha) + (alpha - 1) * r,
        math.log(alpha - 1) - alpha * r,
    )
    # clamp rounding noise at shift = 0
    return max(0.0, float(log_mix - log_norm) / (alpha - 1))
