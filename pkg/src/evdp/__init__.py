"""Differentially private e-values via biased multiplicative noise."""

from .errors import BudgetMismatch, DomainError, MechanismUndefined
from .privacy import (ApproxDPBudget, BudgetLedger, LogSensitivity, RenyiBudget,
                      ledger_compose, rdp_to_approx_dp, renyi_divergence_gaussian,
                      renyi_divergence_laplace, split_budget)
from .mechanisms import (GaussianNoiseSpec, IdentityNoise, LaplaceNoiseSpec,
                         calibrate_gaussian_approx_dp, calibrate_gaussian_rdp,
                         calibrate_laplace_pure_dp, calibrate_laplace_rdp, calibrate_rdp,
                         h_alpha, invert_h_alpha, mgf_at_minus_one, sample_noise, zero_bias)
from .evalues import (EValue, PValue, PrivateEValue, average, continue_product, e_to_p,
                      growth_penalty, privatize)

__version__ = "0.1.0"
