"""E-values, their private releases, and the algebra that keeps both valid.

Values are held on the log scale: mean e-values over 10^5 observations can
reach thousands of nats, far past what a float holds directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import BudgetMismatch, DomainError
from .mechanisms import IdentityNoise, NoiseSpec, sample_noise
from .privacy import ApproxDPBudget, RenyiBudget

Budget = Union[RenyiBudget, ApproxDPBudget]


def _check_log(log_value: float) -> float:
    log_value = float(log_value)
    if math.isnan(log_value) or log_value == math.inf:
        raise DomainError(f"e-value must be finite and nonnegative (log value {log_value})")
    return log_value


def _exp(log_value: float) -> float:
    return math.exp(log_value) if log_value < 709.0 else math.inf


@dataclass(frozen=True)
class EValue:
    """A nonnegative, finite e-value stored as its logarithm."""

    log_value: float

    def __post_init__(self):
        object.__setattr__(self, "log_value", _check_log(self.log_value))

    @classmethod
    def of(cls, value: float) -> "EValue":
        value = float(value)
        if not (value >= 0 and math.isfinite(value)):
            raise DomainError(f"e-value must be finite and nonnegative, got {value}")
        return cls(math.log(value) if value > 0 else -math.inf)

    @property
    def value(self) -> float:
        return _exp(self.log_value)


@dataclass(frozen=True)
class PValue:
    value: float

    def __post_init__(self):
        if not 0 <= self.value <= 1:
            raise DomainError(f"p-value must lie in [0, 1], got {self.value}")


@dataclass(frozen=True)
class PrivateEValue:
    """A released e-value with the budget it was released under.

    ``lineage`` is audit metadata only: a tuple of strings describing the
    privatization and any products or averages that produced this value.
    ``budget`` is None for a non-private passthrough.
    """

    log_value: float
    budget: Optional[Budget]
    mechanism: str
    lineage: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "log_value", _check_log(self.log_value))

    @property
    def value(self) -> float:
        return _exp(self.log_value)


def privatize(e: Union[EValue, float], spec: NoiseSpec, rng: np.random.Generator,
              noise: Optional[float] = None) -> PrivateEValue:
    """Release ``e * exp(-xi)`` with xi drawn from ``spec``.

    ``noise`` substitutes a pre-drawn xi (used when draws are batched).
    """
    if not isinstance(e, EValue):
        e = EValue.of(e)
    if not spec.is_valid:
        raise DomainError(f"noise spec is not a valid e-value mechanism: {spec.describe()}")
    if not isinstance(spec, IdentityNoise) and spec.budget is None:
        raise DomainError("noise spec was not produced by a calibration routine")
    xi = sample_noise(spec, rng) if noise is None else float(noise)
    desc = spec.describe()
    return PrivateEValue(e.log_value - xi, spec.budget, desc, (f"privatize[{desc}]",))


def _same_budget(a: PrivateEValue, b: PrivateEValue, what: str) -> Budget:
    if a.budget != b.budget:
        raise BudgetMismatch(f"{what} needs equal budgets, got {a.budget} and {b.budget}")
    return a.budget


def continue_product(a: PrivateEValue, b: PrivateEValue) -> PrivateEValue:
    """Product of releases on independent data. The budget is unchanged.

    Independence of the two datasets is the caller's assertion; it is
    recorded in the lineage, not checked.
    """
    budget = _same_budget(a, b, "optional continuation")
    return PrivateEValue(a.log_value + b.log_value, budget, a.mechanism,
                         a.lineage + b.lineage + ("product[independent]",))


def average(a: PrivateEValue, b: PrivateEValue, eta: float, same_data: bool) -> PrivateEValue:
    """eta*a + (1-eta)*b. Two releases on the same data cost twice the epsilon."""
    if not 0 <= eta <= 1:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    if a.budget is None or b.budget is None:
        raise BudgetMismatch("averaging needs private releases on both sides")
    if type(a.budget) is not type(b.budget):
        raise BudgetMismatch("cannot average releases under different budget types")
    if isinstance(a.budget, RenyiBudget):
        if a.budget.alpha != b.budget.alpha:
            raise BudgetMismatch("averaging needs a common Renyi order")
        eps = max(a.budget.epsilon, b.budget.epsilon)
        budget = RenyiBudget(a.budget.alpha, 2 * eps if same_data else eps)
    else:
        if a.budget != b.budget:
            raise BudgetMismatch("averaging approximate-DP releases needs equal budgets")
        budget = (ApproxDPBudget(2 * a.budget.epsilon, 2 * a.budget.delta)
                  if same_data else a.budget)
    if eta == 1:
        log_value = a.log_value
    elif eta == 0:
        log_value = b.log_value
    else:
        log_value = float(np.logaddexp(math.log(eta) + a.log_value,
                                       math.log1p(-eta) + b.log_value))
        # keep the convex combination inside [min, max] despite rounding
        log_value = min(max(log_value, min(a.log_value, b.log_value)),
                        max(a.log_value, b.log_value))
    tag = "same-data" if same_data else "independent"
    return PrivateEValue(log_value, budget, a.mechanism,
                         a.lineage + b.lineage + (f"average[eta={eta!r},{tag}]",))


def e_to_p(pe: Union[PrivateEValue, EValue]) -> PValue:
    """min(1, 1/E). A zero e-value carries no evidence and maps to 1."""
    return PValue(min(1.0, math.exp(-pe.log_value)) if pe.log_value > 0 else 1.0)


def growth_penalty(spec: NoiseSpec, n: int) -> float:
    """Loss in expected (1/n) log-growth caused by the noise: E[xi]/n."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return float(spec.mean) / int(n)
