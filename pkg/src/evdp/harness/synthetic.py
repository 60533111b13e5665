"""Synthetic stand-ins for the datasets the procedures were designed for."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DomainError
from ..conformal import ScoreQuantizer


def bernoulli(p: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """0/1 outcomes with prevalence p."""
    if not 0 <= p <= 1:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if n < 1:
        raise DomainError("n must be >= 1")
    return (rng.random(int(n)) < p).astype(float)


def changepoint(mean_before: float, mean_after: float, t_change: int, n: int,
                rng: np.random.Generator) -> np.ndarray:
    """0/1 losses whose mean jumps from ``mean_before`` to ``mean_after`` at index t_change."""
    for m in (mean_before, mean_after):
        if not 0 <= m <= 1:
            raise DomainError(f"means must lie in [0, 1], got {m}")
    if not 0 <= t_change <= n:
        raise DomainError(f"change index {t_change} is outside [0, {n}]")
    mu = np.where(np.arange(int(n)) < t_change, mean_before, mean_after)
    return (rng.random(int(n)) < mu).astype(float)


def score_mixture(weights, quantizer: ScoreQuantizer, n: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Scores drawn from bin centers with the given weights."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (quantizer.bins,) or np.any(w < 0) or w.sum() <= 0:
        raise DomainError("need one nonnegative weight per bin, not all zero")
    return rng.choice(quantizer.centers, size=int(n), p=w / w.sum())


@dataclass(frozen=True)
class ClassifierSim:
    """A noisy classifier over ``n_classes`` labels.

    Logits are ``signal`` on the true class plus standard normal noise. The
    conformity score of (x, y) is 1 / clamp(p(y|x), 0.01, 1) ** 0.25, mapped
    linearly from its natural range [1, 0.01 ** -0.25] onto [s_lo, s_hi].
    """

    n_classes: int = 2
    signal: float = 2.0
    s_lo: float = 1.0
    s_hi: float = 100.0

    def probs(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        y = rng.integers(self.n_classes, size=int(n))
        logits = rng.standard_normal((int(n), self.n_classes))
        logits[np.arange(int(n)), y] += self.signal
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(axis=1, keepdims=True), y

    def score(self, p: np.ndarray) -> np.ndarray:
        raw = 1 / np.clip(p, 0.01, 1) ** 0.25
        top = 0.01 ** -0.25
        return self.s_lo + (raw - 1) * (self.s_hi - self.s_lo) / (top - 1)

    def calibration(self, n: int, rng: np.random.Generator) -> np.ndarray:
        p, y = self.probs(n, rng)
        return self.score(p[np.arange(int(n)), y])

    def candidates(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Per test point: the score of every label, and the true label."""
        p, y = self.probs(n, rng)
        return self.score(p), y


def make_data(kind: str, n: int, rng: np.random.Generator, p: float = 0.3,
              mean_before: float = 0.5, mean_after: float = 0.6,
              t_change: Optional[int] = None) -> np.ndarray:
    if kind == "bernoulli":
        return bernoulli(p, n, rng)
    if kind == "changepoint":
        return changepoint(mean_before, mean_after, n // 2 if t_change is None else t_change, n, rng)
    raise DomainError(f"unknown generator {kind!r}")
