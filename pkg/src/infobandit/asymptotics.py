"""Closed-form large-n predictions for two-armed Bernoulli bandits.

All rates are in nats. Functions are pure and cheap; they serve as
reference values for simulations, never as inputs to a policy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from scipy import optimize

from infobandit.core import binary_entropy, kl_bernoulli

SPLIT_CHECK_TOL = 1e-9


class DivergentBound(ValueError):
    """Raised when a bound diverges because two arms share a success probability."""


@dataclass(frozen=True)
class RatePrediction:
    name: str
    value: float
    units: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if math.isnan(self.value):
            raise ValueError(f"{self.name} is undefined for {self.params}")


def _kl(p, q) -> float:
    return float(kl_bernoulli(p, q))


def _check_pair(p1, p2):
    if p1 == p2:
        raise ValueError("the two success probabilities must differ")
    for p in (p1, p2):
        if not 0.0 < p < 1.0:
            raise ValueError("success probabilities must lie strictly inside (0, 1)")


def lai_robbins_plays(p_i: float, p_1: float, n: float) -> float:
    """Asymptotic lower bound ln n / D(p_i, p_1) on plays of a worse arm."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if p_i == p_1:
        raise DivergentBound("equal success probabilities make the bound diverge")
    if p_i > p_1:
        raise ValueError("p_i must be below p_1")
    return math.log(n) / _kl(p_i, p_1)


def lai_robbins_constant(probs: Sequence[float]) -> float:
    """Coefficient of ln n in the minimal regret, sum over worse arms of gap / D."""
    probs = [float(p) for p in probs]
    top = max(probs)
    if sum(p == top for p in probs) > 1:
        raise DivergentBound("several arms share the largest success probability")
    return math.fsum((top - p) / _kl(p, top) for p in probs if p != top)


def infop_boundary_residual(n: float, n_2: float, pi_1: float, pi_2: float) -> float:
    """n_2 D(pi_2, pi_1) - ln n; negative when the worse-looking arm is due."""
    if not pi_1 > pi_2:
        raise ValueError("need pi_1 > pi_2")
    return n_2 * _kl(pi_2, pi_1) - math.log(n)


def mixture_point(n_1: float, n_2: float, pi_1: float, pi_2: float) -> float:
    if n_1 < 0 or n_2 < 0 or n_1 + n_2 < 1:
        raise ValueError("need non-negative play counts with n_1 + n_2 >= 1")
    return (n_1 * pi_1 + n_2 * pi_2) / (n_1 + n_2)


def _split_by_bisection(p1, p2):
    lo, hi = min(p1, p2), max(p1, p2)
    return optimize.brentq(lambda q: _kl(p1, q) - _kl(p2, q), lo, hi, xtol=1e-15, rtol=1e-15)


def optimal_split(pi_1: float, pi_2: float) -> tuple[float, float]:
    """(pi_so, x_o): the point equidistant in D from both means, and arm 1's share.

    The closed form is cross-checked against a root search of the defining
    equality; a mismatch raises ArithmeticError.
    """
    _check_pair(pi_1, pi_2)
    f = (float(binary_entropy(pi_1)) - float(binary_entropy(pi_2))) / (pi_1 - pi_2)
    pso = 1.0 / (1.0 + math.exp(f))
    check = _split_by_bisection(pi_1, pi_2)
    if abs(pso - check) > SPLIT_CHECK_TOL:
        raise ArithmeticError(f"closed-form split {pso!r} disagrees with root {check!r}")
    return pso, (pso - pi_2) / (pi_1 - pi_2)


def infoid_rate(p_1: float, p_2: float) -> float:
    """Fastest possible decay rate of ln H(b_max) per play."""
    pso, _ = optimal_split(p_1, p_2)
    return -_kl(p_1, pso)


def maxent_rate(p_1: float, p_2: float) -> tuple[float, float, float]:
    """(rate, x, p_s) for the rule that maximizes the drop of H rather than ln H.

    The share x weights arm 1 by D(p_1, p_2). Simulations settle at the
    complementary share instead; see `maxent_operating_point`.
    """
    _check_pair(p_1, p_2)
    d12, d21 = _kl(p_1, p_2), _kl(p_2, p_1)
    total = d12 + d21
    x = d12 / total
    ps = (p_1 * d12 + p_2 * d21) / total
    rate = -(d12 * _kl(p_1, ps) + d21 * _kl(p_2, ps)) / total
    return rate, x, ps


def maxent_operating_point(p_1: float, p_2: float) -> tuple[float, float, float]:
    """(rate, x, p_s) where the max-entropy-drop rule actually balances.

    The two arms' one-play drops of H match when arm 1 gets the share
    D(p_2, p_1) / (D(p_1, p_2) + D(p_2, p_1)). For a fixed share the decay
    exponent is x D(p_1, p_s) + (1 - x) D(p_2, p_s) at the mixture point p_s.
    """
    _check_pair(p_1, p_2)
    d12, d21 = _kl(p_1, p_2), _kl(p_2, p_1)
    x = d21 / (d12 + d21)
    ps = x * p_1 + (1.0 - x) * p_2
    return -(x * _kl(p_1, ps) + (1.0 - x) * _kl(p_2, ps)), x, ps


def voi_delta_regret(p_1: float, p_2: float, m: int) -> float:
    """Regret change from starting with H(b_max) = ln 2 / 2^m instead of ln 2."""
    if not p_1 > p_2:
        raise ValueError("need p_1 > p_2")
    if m < 0 or int(m) != m:
        raise ValueError("m must be a non-negative integer")
    pso, _ = optimal_split(p_1, p_2)
    return -math.log(2.0) * (p_1 - pso) / _kl(p_1, pso) * m


def infop_entropy_asymptote(n_1: float, n_2: float, pi_1: float, pi_2: float) -> tuple[float, float]:
    """(Gaussian term of H(pi_max), exponent of the exploratory correction).

    The correction's prefactor is not predicted, so only its exponent
    -n_2 D(pi_2, pi_1) is returned.
    """
    if n_1 <= 0:
        raise ValueError("n_1 must be positive")
    var = pi_1 * (1.0 - pi_1) / n_1
    gauss = 0.5 * math.log(2.0 * math.pi * math.e * var)
    return gauss, -n_2 * _kl(pi_2, pi_1)


def rate_table(p_1: float, p_2: float) -> list[RatePrediction]:
    """Every two-arm prediction for (p_1, p_2), with p_1 the better arm."""
    if not p_1 > p_2:
        raise ValueError("need p_1 > p_2")
    params = {"p1": p_1, "p2": p_2}
    pso, xo = optimal_split(p_1, p_2)
    f = math.log(1.0 / pso - 1.0)
    me_rate, me_x, me_ps = maxent_rate(p_1, p_2)
    op_rate, op_x, op_ps = maxent_operating_point(p_1, p_2)
    rows = [
        ("kl_p2_p1", _kl(p_2, p_1), "nats"),
        ("lai_robbins_plays_per_log_n", 1.0 / _kl(p_2, p_1), "plays per nat"),
        ("lai_robbins_regret_constant", lai_robbins_constant((p_1, p_2)), "regret per log-play"),
        ("split_f", f, "dimensionless"),
        ("pi_so", pso, "probability"),
        ("x_o", xo, "fraction"),
        ("infoid_rate", infoid_rate(p_1, p_2), "nats per play"),
        ("maxent_x", me_x, "fraction"),
        ("maxent_ps", me_ps, "probability"),
        ("maxent_rate", me_rate, "nats per play"),
        ("maxent_operating_x", op_x, "fraction"),
        ("maxent_operating_ps", op_ps, "probability"),
        ("maxent_operating_rate", op_rate, "nats per play"),
        ("voi_slope", -voi_delta_regret(p_1, p_2, 1), "regret per halving"),
    ]
    return [RatePrediction(name, float(v), units, dict(params)) for name, v, units in rows]
