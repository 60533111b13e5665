"""Universal-portfolio e-value for the mean of a variable bounded in [0, 1].

The betting prior is a finite set of weighted atoms. For each atom the state
keeps the log-wealth of the constant bet ``lambda``; the e-value is the
prior mixture of those wealths. This mixture equals the sequential product of
``1 + lambda_i (Y_i - theta)`` with the predictable bet ``lambda_i`` formed
from observations 1..i-1, and it does not depend on the order of the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import DomainError
from .evalues import EValue
from .privacy import LogSensitivity

DEFAULT_ATOMS = 101
DEFAULT_MARGIN = 1e-6


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BettingPrior:
    atoms: np.ndarray
    weights: np.ndarray
    support: tuple[float, float]

    def __post_init__(self):
        atoms, weights = _frozen(self.atoms), _frozen(self.weights)
        lo, hi = map(float, self.support)
        if atoms.ndim != 1 or atoms.shape != weights.shape or atoms.size == 0:
            raise DomainError("atoms and weights must be matching nonempty 1-d arrays")
        if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
            raise DomainError("prior weights must be nonnegative and sum to 1")
        if lo > hi or np.any(atoms < lo) or np.any(atoms > hi):
            raise DomainError("every atom must lie inside the support")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "support", (lo, hi))

    def check_theta(self, theta: float) -> None:
        """Raise unless every atom bets safely against null mean ``theta``."""
        if not 0 < theta < 1:
            raise DomainError(f"theta must lie in (0, 1), got {theta}")
        lo, hi = self.support
        if not (lo > -1 / (1 - theta) and hi < 1 / theta):
            raise DomainError(
                f"support [{lo}, {hi}] is not inside (-1/(1-theta), 1/theta) for theta={theta}"
            )


def _midpoints(lo: float, hi: float, k: int) -> np.ndarray:
    edges = np.linspace(lo, hi, k + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def make_uniform_prior(lambda_inf: float, lambda_sup: float, K: int, theta: float,
                       margin: float = DEFAULT_MARGIN) -> BettingPrior:
    """K equally weighted midpoints of [lambda_inf, lambda_sup].

    The support is first clipped to the open interval (-1/(1-theta), 1/theta)
    shrunk by a relative ``margin``, so ``1 + lambda (y - theta) >= margin``
    for every y in [0, 1].
    """
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    if not lambda_inf <= lambda_sup:
        raise DomainError(f"empty support [{lambda_inf}, {lambda_sup}]")
    lo = max(lambda_inf, -(1 - margin) / (1 - theta))
    hi = min(lambda_sup, (1 - margin) / theta)
    if lo > hi:
        raise DomainError(f"support [{lambda_inf}, {lambda_sup}] has no valid bets at theta={theta}")
    K = int(K)
    return BettingPrior(_midpoints(lo, hi, K), np.full(K, 1 / K), (lo, hi))


def make_one_sided_prior(c: float, theta: float, K: int) -> BettingPrior:
    """K equally weighted midpoints of [0, c/theta); bets only against large means."""
    if not 0 < c < 1:
        raise DomainError(f"c must lie in (0, 1), got {c}")
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    K = int(K)
    return BettingPrior(_midpoints(0.0, c / theta, K), np.full(K, 1 / K), (0.0, c / theta))


@dataclass(frozen=True, eq=False)
class MeanEValueState:
    theta: float
    prior: BettingPrior
    log_wealth: np.ndarray
    n: int = 0

    def __post_init__(self):
        lw = _frozen(self.log_wealth)
        if lw.shape != self.prior.atoms.shape:
            raise DomainError("one log-wealth entry per atom is required")
        if self.n < 0:
            raise DomainError("n must be >= 0")
        object.__setattr__(self, "log_wealth", lw)


def new_state(prior: BettingPrior, theta: float) -> MeanEValueState:
    prior.check_theta(theta)
    return MeanEValueState(float(theta), prior, np.zeros_like(prior.atoms), 0)


def _increments(ys: np.ndarray, theta: float, atoms: np.ndarray) -> np.ndarray:
    """Summed log(1 + lambda_k (y - theta)) over ys, one entry per atom."""
    if np.any(~(ys >= 0) | ~(ys <= 1)):
        bad = int(np.flatnonzero(~(ys >= 0) | ~(ys <= 1))[0])
        raise DomainError(f"observation {bad} = {ys[bad]!r} is outside [0, 1]")
    # grouping equal values makes Bernoulli data O(K) regardless of n
    values, counts = np.unique(ys, return_counts=True)
    factors = 1 + np.outer(values - theta, atoms)
    if np.any(factors <= 0):
        raise DomainError("a bet would stake more than the current wealth")
    return counts @ np.log(factors)


def update(state: MeanEValueState, y: float) -> MeanEValueState:
    """Observe one bounded sample."""
    return update_many(state, [y])


def update_many(state: MeanEValueState, ys) -> MeanEValueState:
    """Observe a batch of samples; equivalent to repeated :func:`update`."""
    ys = np.asarray(ys, dtype=float).ravel()
    if ys.size == 0:
        return state
    inc = _increments(ys, state.theta, state.prior.atoms)
    return MeanEValueState(state.theta, state.prior, state.log_wealth + inc, state.n + ys.size)


def log_evalue(state: MeanEValueState) -> float:
    if state.n == 0:
        return 0.0
    return float(logsumexp(state.log_wealth, b=state.prior.weights))


def evalue(state: MeanEValueState) -> EValue:
    """Prior mixture of the per-atom wealths."""
    return EValue(log_evalue(state))


def betting_fraction(state: MeanEValueState) -> float:
    """Bet for the next observation: wealth-weighted mean of the atoms."""
    post = softmax(state.log_wealth + np.log(state.prior.weights))
    return float(post @ state.prior.atoms)


def mean_evalue(ys, theta: float, prior: BettingPrior) -> EValue:
    return evalue(update_many(new_state(prior, theta), ys))


def log_sensitivity_bound(prior: BettingPrior, theta: float) -> LogSensitivity:
    """Largest |log E| change from adding or removing one sample.

    Adding a sample multiplies the mixture by ``1 + lambda (y - theta)`` for
    some lambda in the support, so the bound is the extreme of that factor.
    """
    lo, hi = prior.support
    up = math.log1p(max(hi * (1 - theta), -lo * theta))
    down = -math.log1p(min(lo * (1 - theta), -hi * theta))
    return LogSensitivity(max(up, down, 0.0))


def lipschitz_bound(prior: BettingPrior, theta_inf: float, theta_sup: float, n: int = 1) -> float:
    """Lipschitz constant of theta -> log E_theta over [theta_inf, theta_sup].

    Each observation contributes a derivative ``-lambda / (1 + lambda (y - theta))``
    bounded by the per-observation constant below; the bound for ``n``
    observations is ``n`` times it.
    """
    if not 0 < theta_inf <= theta_sup < 1:
        raise DomainError(f"need 0 < theta_inf <= theta_sup < 1, got [{theta_inf}, {theta_sup}]")
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a nonnegative integer, got {n!r}")
    lo, hi = prior.support
    den_hi = 1 - hi * theta_sup
    den_lo = 1 + lo * (1 - theta_inf)
    if den_hi <= 0 or den_lo <= 0:
        raise DomainError("prior support is incompatible with the theta range")
    per_obs = max(abs(hi / den_hi), abs(lo / den_lo))
    return int(n) * per_obs
