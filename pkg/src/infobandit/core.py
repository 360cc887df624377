"""Scalar primitives for Bernoulli arms with Beta(1, 1) priors."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from infobandit import _kernels


@dataclass(frozen=True, slots=True)
class ArmStats:
    """Play and win counters of one arm.

    The posterior over the arm's success probability is
    Beta(wins + 1, plays - wins + 1).
    """

    wins: int = 0
    plays: int = 0

    def __post_init__(self):
        for name in ("wins", "plays"):
            value = getattr(self, name)
            if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not 0 <= self.wins <= self.plays:
            raise ValueError(f"need 0 <= wins <= plays, got wins={self.wins}, plays={self.plays}")

    @property
    def losses(self) -> int:
        return self.plays - self.wins

    @property
    def alpha(self) -> float:
        return float(self.wins + 1)

    @property
    def beta(self) -> float:
        return float(self.plays - self.wins + 1)

    @property
    def mean(self) -> float:
        """Sample mean w/n. Undefined for an unplayed arm."""
        if self.plays == 0:
            raise ValueError("sample mean of an unplayed arm is undefined")
        return self.wins / self.plays

    @property
    def predictive(self) -> float:
        """Posterior-predictive probability of a win, (w + 1)/(n + 2)."""
        return (self.wins + 1) / (self.plays + 2)


def record(stats: ArmStats, win: bool) -> ArmStats:
    return ArmStats(stats.wins + int(bool(win)), stats.plays + 1)


def record_batch(stats: ArmStats, plays: int, wins: int) -> ArmStats:
    if plays < 0 or wins < 0:
        raise ValueError("plays and wins must be non-negative")
    if wins > plays:
        raise ValueError(f"wins ({wins}) exceed plays ({plays})")
    return ArmStats(stats.wins + int(wins), stats.plays + int(plays))


def kl_bernoulli(p, q):
    """D(p, q) in nats, with 0 ln 0 = 0 and +inf when q hits 0 or 1 and p != q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any((p < 0) | (p > 1) | (q < 0) | (q > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        d = special.rel_entr(p, q) + special.rel_entr(1.0 - p, 1.0 - q)
    d = np.where(p == q, 0.0, np.maximum(d, 0.0))
    return d[()] if d.ndim == 0 else d


def binary_entropy(p):
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probability must lie in [0, 1]")
    h = special.entr(p) + special.entr(1.0 - p)
    return h[()] if h.ndim == 0 else h


def beta_log_pdf(stats: ArmStats, pi):
    """Log posterior density at pi; -inf where the density vanishes."""
    pi = np.asarray(pi, dtype=float)
    w, f = stats.wins, stats.losses
    with np.errstate(divide="ignore"):
        out = special.xlogy(w, pi) + special.xlog1py(f, -pi) - log_beta_fn(w + 1, f + 1)
    return out[()] if out.ndim == 0 else out


def beta_cdf(stats: ArmStats, pi):
    """Regularized incomplete Beta I_pi(w + 1, n - w + 1)."""
    pi = np.asarray(pi, dtype=float)
    out = special.betainc(stats.alpha, stats.beta, np.clip(pi, 0.0, 1.0))
    return out[()] if out.ndim == 0 else out


def beta_log_cdf(stats: ArmStats, pi):
    """Logarithm of beta_cdf, accurate deep into the left tail."""
    pi = np.asarray(pi, dtype=float)
    flat = np.clip(np.atleast_1d(pi).ravel(), 0.0, 1.0)
    out = _kernels.log_betainc_array(stats.alpha, stats.beta, flat).reshape(pi.shape)
    return out[()] if out.ndim == 0 else out


def log_beta_fn(a: float, b: float) -> float:
    """ln B(a, b), accurate to double precision for arguments up to 1e9 and beyond."""
    if a <= 0 or b <= 0:
        raise ValueError("Beta function arguments must be positive")
    return _kernels.log_beta(float(a), float(b))
