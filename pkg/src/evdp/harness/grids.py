"""Grids of calibrated mechanisms used by the validation suite and tests."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from ..mechanisms import (NoiseSpec, calibrate_gaussian_rdp, calibrate_laplace_rdp)
from ..privacy import RenyiBudget

RENYI_ORDERS = (2.0, 10.0, 50.0)
EPSILONS = (0.01, 0.1, 0.5, 1.0, 10.0)
SENSITIVITIES = (0.01, 0.05, 0.1, 0.5, 1.0)

# Monte Carlo with 10^6 draws resolves E[exp(-xi)] only inside these windows:
# larger spreads give heavy lognormal tails, smaller ones a bias below the
# standard error (which would hide a missing bias from the negative control).
GAUSSIAN_VARIANCE_WINDOW = (1e-3, 2.0)
LAPLACE_SCALE_WINDOW = (0.01, 0.45)


@dataclass(frozen=True)
class GridSpec:
    kind: str
    sensitivity: float
    budget: RenyiBudget
    spec: NoiseSpec

    @property
    def label(self) -> str:
        return (f"{self.kind}(alpha={self.budget.alpha:g}, eps={self.budget.epsilon:g}, "
                f"sens={self.sensitivity:g})")


def full_grid() -> list[GridSpec]:
    """Every defined mechanism on the full order x epsilon x sensitivity product."""
    out = []
    for a, e, d in product(RENYI_ORDERS, EPSILONS, SENSITIVITIES):
        b = RenyiBudget(a, e)
        out.append(GridSpec("gaussian", d, b, calibrate_gaussian_rdp(d, b)))
        lap = calibrate_laplace_rdp(d, b)
        if lap is not None:
            out.append(GridSpec("laplace", d, b, lap))
    return out


def mc_grid() -> list[GridSpec]:
    """The part of :func:`full_grid` that Monte Carlo can resolve."""
    lo_v, hi_v = GAUSSIAN_VARIANCE_WINDOW
    lo_b, hi_b = LAPLACE_SCALE_WINDOW
    out = []
    for g in full_grid():
        if g.kind == "gaussian" and lo_v <= g.spec.variance <= hi_v:
            out.append(g)
        elif g.kind == "laplace" and lo_b <= g.spec.scale <= hi_b:
            out.append(g)
    return out
