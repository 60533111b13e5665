"""Biased multiplicative noise mechanisms.

A released e-value is ``E * exp(-xi)``. Each spec below is a distribution for
``xi`` whose spread buys privacy and whose mean (the bias) is the smallest
value keeping ``E[exp(-xi)] <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .errors import DomainError, MechanismUndefined
from .privacy import ApproxDPBudget, RenyiBudget, as_log_sensitivity

Budget = Union[RenyiBudget, ApproxDPBudget]


@dataclass(frozen=True)
class GaussianNoiseSpec:
    mean: float
    variance: float
    budget: Optional[Budget] = None

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise DomainError("Gaussian noise parameters must be finite")
        if self.variance <= 0:
            raise DomainError(f"variance must be positive, got {self.variance}")

    @property
    def is_valid(self) -> bool:
        """Whether multiplying by exp(-xi) keeps an e-value valid."""
        return self.mean >= self.variance / 2

    def describe(self) -> str:
        return f"gaussian(mean={self.mean!r}, variance={self.variance!r})"


@dataclass(frozen=True)
class LaplaceNoiseSpec:
    mean: float
    scale: float
    budget: Optional[Budget] = None

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.scale)):
            raise DomainError("Laplace noise parameters must be finite")
        if self.scale <= 0:
            raise DomainError(f"scale must be positive, got {self.scale}")

    @property
    def is_valid(self) -> bool:
        return self.scale < 1 and self.mean >= -math.log1p(-self.scale**2)

    def describe(self) -> str:
        return f"laplace(mean={self.mean!r}, scale={self.scale!r})"


@dataclass(frozen=True)
class IdentityNoise:
    """No noise. Private only when the log-sensitivity is zero.

    ``budget`` is None for an explicit non-private passthrough.
    """

    budget: Optional[Budget] = None
    mean = 0.0
    is_valid = True

    def describe(self) -> str:
        return "identity"


NoiseSpec = Union[GaussianNoiseSpec, LaplaceNoiseSpec, IdentityNoise]

MECHANISMS = ("gaussian", "laplace", "identity")


def calibrate_gaussian_rdp(sens, budget: RenyiBudget) -> NoiseSpec:
    """Biased Gaussian: variance alpha*D^2/(2 eps), mean variance/2."""
    d = as_log_sensitivity(sens).value
    if d == 0:
        return IdentityNoise(budget)
    variance = budget.alpha * d * d / (2 * budget.epsilon)
    return GaussianNoiseSpec(variance / 2, variance, budget)


def _log_h(t: float, d: float, alpha: float) -> float:
    return float(np.logaddexp(math.log(alpha) + (alpha - 1) * d * t,
                              math.log(alpha - 1) - alpha * d * t))


def h_alpha(t: float, sens, alpha: float) -> float:
    """alpha*exp((alpha-1)*D*t) + (alpha-1)*exp(-alpha*D*t), for t >= 0."""
    d = as_log_sensitivity(sens).value
    if not t >= 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if alpha <= 1:
        raise DomainError(f"Renyi order must exceed 1, got {alpha}")
    if t == 0 or d == 0:
        return 2 * alpha - 1
    return _exp_or_inf(_log_h(t, d, alpha))


def _invert_log_h(log_target: float, d: float, alpha: float) -> float:
    log_floor = math.log(2 * alpha - 1)
    if log_target < log_floor - 1e-12:
        raise DomainError("target lies below the minimum 2*alpha - 1 of h_alpha")
    if log_target <= log_floor:
        # rounding can put h(0) a few ulp below 2*alpha - 1
        return 0.0
    hi = 1.0
    while _log_h(hi, d, alpha) < log_target:
        hi *= 2
        if not math.isfinite(hi):
            raise DomainError("could not bracket the inverse of h_alpha")
    lo = 0.0
    # bisect down to float resolution; lo keeps h(lo) <= target
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _log_h(mid, d, alpha) <= log_target:
            lo = mid
        else:
            hi = mid
    return lo


def invert_h_alpha(target: float, sens, alpha: float) -> float:
    """Solve h_alpha(t) = target for t >= 0 by bisection.

    Returns the largest float t with h_alpha(t) <= target, so a Laplace scale
    1/t derived from it never undershoots the privacy requirement.
    """
    d = as_log_sensitivity(sens).value
    if d == 0:
        raise DomainError("h_alpha is constant when the sensitivity is zero")
    if alpha <= 1:
        raise DomainError(f"Renyi order must exceed 1, got {alpha}")
    if not target >= (2 * alpha - 1) * (1 - 1e-12):
        raise DomainError(f"target {target} is below 2*alpha - 1 = {2 * alpha - 1}")
    return _invert_log_h(math.log(target), d, alpha)


def laplace_rdp_scale(sens, budget: RenyiBudget) -> float:
    """Scale b = 1 / h_alpha^{-1}((2 alpha - 1) exp((alpha - 1) eps)); may be >= 1."""
    d = as_log_sensitivity(sens).value
    if d == 0:
        return 0.0
    a = budget.alpha
    t = _invert_log_h(math.log(2 * a - 1) + (a - 1) * budget.epsilon, d, a)
    return math.inf if t == 0 else 1 / t


def calibrate_laplace_rdp(sens, budget: RenyiBudget) -> Optional[NoiseSpec]:
    """Biased Laplace for Renyi DP, or None when the scale would be >= 1."""
    d = as_log_sensitivity(sens).value
    if d == 0:
        return IdentityNoise(budget)
    b = laplace_rdp_scale(d, budget)
    if b >= 1:
        return None
    return LaplaceNoiseSpec(-math.log1p(-b * b), b, budget)


def calibrate_gaussian_approx_dp(sens, epsilon: float, delta: float) -> NoiseSpec:
    """(eps, delta)-DP biased Gaussian with c^2 = 2 log(1.25/delta)."""
    d = as_log_sensitivity(sens).value
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    budget = ApproxDPBudget(epsilon, delta)
    if d == 0:
        return IdentityNoise(budget)
    c2 = 2 * math.log(1.25 / delta)
    variance = c2 * d * d / (epsilon * epsilon)
    return GaussianNoiseSpec(variance / 2, variance, budget)


def calibrate_laplace_pure_dp(sens, epsilon: float) -> NoiseSpec:
    """(eps, 0)-DP biased Laplace with scale D/eps; needs eps > D."""
    d = as_log_sensitivity(sens).value
    budget = ApproxDPBudget(epsilon, 0.0)
    if d == 0:
        return IdentityNoise(budget)
    if not epsilon > d:
        raise MechanismUndefined(
            f"pure-DP biased Laplace needs epsilon > sensitivity ({epsilon} <= {d})"
        )
    b = d / epsilon
    return LaplaceNoiseSpec(-math.log1p(-b * b), b, budget)


def calibrate_rdp(kind: str, sens, budget: RenyiBudget) -> NoiseSpec:
    """Dispatch on mechanism name.

    ``"identity"`` is a non-private passthrough unless the sensitivity is zero.
    """
    d = as_log_sensitivity(sens)
    if kind == "gaussian":
        return calibrate_gaussian_rdp(d, budget)
    if kind == "laplace":
        spec = calibrate_laplace_rdp(d, budget)
        if spec is None:
            raise MechanismUndefined(
                f"biased Laplace undefined at alpha={budget.alpha}, eps={budget.epsilon}, "
                f"sensitivity={d.value}: scale would be >= 1; use the Gaussian mechanism"
            )
        return spec
    if kind == "identity":
        return IdentityNoise(budget if d.value == 0 else None)
    raise DomainError(f"unknown mechanism {kind!r}; expected one of {MECHANISMS}")


def sample_noise(spec: NoiseSpec, rng: np.random.Generator, size=None):
    """Draw xi from ``spec``. A scalar float when ``size`` is None."""
    if isinstance(spec, IdentityNoise):
        out = np.zeros(size) if size is not None else 0.0
    elif isinstance(spec, GaussianNoiseSpec):
        out = rng.normal(spec.mean, math.sqrt(spec.variance), size)
    elif isinstance(spec, LaplaceNoiseSpec):
        out = rng.laplace(spec.mean, spec.scale, size)
    else:
        raise TypeError(f"not a noise spec: {spec!r}")
    return float(out) if size is None else out


def _exp_or_inf(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def mgf_at_minus_one(spec: NoiseSpec) -> float:
    """E[exp(-xi)], in closed form."""
    if isinstance(spec, IdentityNoise):
        return 1.0
    if isinstance(spec, GaussianNoiseSpec):
        return _exp_or_inf(-spec.mean + spec.variance / 2)
    if isinstance(spec, LaplaceNoiseSpec):
        if spec.scale >= 1:
            raise MechanismUndefined("Laplace MGF at -1 is infinite for scale >= 1")
        return _exp_or_inf(-spec.mean - math.log1p(-spec.scale**2))
    raise TypeError(f"not a noise spec: {spec!r}")


def zero_bias(spec: NoiseSpec) -> NoiseSpec:
    """The same spread with the bias removed. Not a valid mechanism."""
    if isinstance(spec, IdentityNoise):
        return spec
    return replace(spec, mean=0.0)
