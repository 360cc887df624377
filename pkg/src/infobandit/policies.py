"""Arm-selection rules.

Entropy-driven rules return the expected entropy change per arm as their
score and play the most negative one; index rules return their index and
play the largest. Ties go to the lowest arm index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from infobandit import _kernels
from infobandit.belief import DEFAULT_SETTINGS, BeliefGrid, GridSettings, prob_best, refine
from infobandit.core import ArmStats

KINDS = ("info-p", "info-id", "max-ent", "thompson", "kl-ucb", "ucb-lai", "ucb-tuned", "ucb2")
GRID_KINDS = ("info-p", "info-id", "max-ent")
INDEX_KINDS = {"kl-ucb": _kernels.KLUCB, "ucb-lai": _kernels.UCBLAI,
               "ucb-tuned": _kernels.UCBTUNED, "ucb2": _kernels.UCB2}

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "info-p"
    xi: float = -0.5
    c: float = 0.0
    alpha: float = 0.001
    grid: GridSettings = field(default_factory=GridSettings)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not math.isfinite(self.xi):
            raise ValueError("xi must be finite")
        if not (math.isfinite(self.c) and self.c >= 0):
            raise ValueError("c must be finite and non-negative")
        if not (math.isfinite(self.alpha) and 0 < self.alpha < 1):
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class Decision:
    chosen: int
    scores: np.ndarray
    tie: bool


def _ties(scores: np.ndarray, chosen: int) -> bool:
    ref = scores[chosen]
    tol = TIE_RTOL * max(abs(ref), 1e-300)
    others = np.delete(scores, chosen)
    return bool(np.any(np.abs(others - ref) <= tol))


def _minimizing(scores: np.ndarray) -> Decision:
    chosen = int(_kernels.argmin_first(scores))
    return Decision(chosen, scores, _ties(scores, chosen))


def _maximizing(scores: np.ndarray) -> Decision:
    chosen = int(np.argmax(scores))
    return Decision(chosen, scores, bool(np.sum(scores == scores[chosen]) > 1))


def _grid_for(stats: Sequence[ArmStats], grid: BeliefGrid | None, settings: GridSettings) -> BeliefGrid:
    stats = tuple(stats)
    if grid is None:
        return refine(None, stats, settings)
    if grid.stats != stats:
        raise ValueError("grid was built for different arm statistics")
    return grid


def _ab(stats):
    a = np.array([s.alpha for s in stats])
    b = np.array([s.beta for s in stats])
    return a, b


def infop_decide(stats: Sequence[ArmStats], grid: BeliefGrid | None = None,
                 settings: GridSettings = DEFAULT_SETTINGS) -> Decision:
    """Play the arm with the most negative expected change of H(pi_max)."""
    grid = _grid_for(stats, grid, settings)
    a, b = _ab(grid.stats)
    scores = np.empty(len(grid.stats))
    _kernels.infop_scores(grid.nodes, grid.weights, np.ascontiguousarray(grid.pdf),
                          np.ascontiguousarray(grid.cdf), a, b, scores)
    return _minimizing(scores)


def _identity_scores(grid: BeliefGrid, relative: bool) -> np.ndarray:
    a, b = _ab(grid.stats)
    x = grid.nodes
    with np.errstate(divide="ignore"):
        lx = np.log(x)
        l1x = np.log1p(-x)
    scores = np.empty(len(grid.stats))
    _kernels.identity_scores(lx, l1x, np.log(grid.weights), np.ascontiguousarray(grid.log_pdf),
                             np.ascontiguousarray(grid.log_cdf), a, b, relative, scores)
    return scores


def infoid_decide(stats: Sequence[ArmStats], grid: BeliefGrid | None = None,
                  settings: GridSettings = DEFAULT_SETTINGS) -> Decision:
    """Play the arm with the most negative expected change of ln H(b_max)."""
    grid = _grid_for(stats, grid, settings)
    return _minimizing(_identity_scores(grid, relative=False))


def maxent_decide(stats: Sequence[ArmStats], grid: BeliefGrid | None = None,
                  settings: GridSettings = DEFAULT_SETTINGS) -> Decision:
    """Play the arm with the most negative expected change of H(b_max).

    Scores are reported relative to the current H(b_max), which has the same
    ordering and stays representable when H itself underflows.
    """
    grid = _grid_for(stats, grid, settings)
    return _minimizing(_identity_scores(grid, relative=True))


def thompson_decide(stats: Sequence[ArmStats], rng: np.random.Generator,
                    grid: BeliefGrid | None = None,
                    settings: GridSettings = DEFAULT_SETTINGS, with_q: bool = False) -> Decision:
    """One posterior draw per arm, play the largest.

    Scores hold the draws, or the probabilities q of being best when
    `with_q` is set (one grid integration per call).
    """
    stats = tuple(stats)
    draws = np.array([rng.beta(s.alpha, s.beta) for s in stats])
    chosen = int(np.argmax(draws))
    if not with_q:
        return Decision(chosen, draws, False)
    if len(stats) < 2:
        return Decision(chosen, np.ones(1), False)
    return Decision(chosen, prob_best(_grid_for(stats, grid, settings)).q, False)


def klucb_index(stats: ArmStats, t: int, c: float = 0.0) -> float:
    """Largest q >= mean with n D(mean, q) <= ln t + c ln ln t."""
    if stats.plays == 0:
        return 1.0
    if t < 2:
        raise ValueError("t must be at least 2")
    if c < 0:
        raise ValueError("c must be non-negative")
    budget = math.log(t)
    if c > 0 and t > math.e:
        budget += c * math.log(math.log(t))
    return _kernels.kl_upper_bisect(stats.mean, max(budget, 0.0) / stats.plays, 1e-12)


def ucblai_target(plays: int, n: int, xi: float) -> float:
    """ln(n/n_i) + xi ln ln(n/n_i), zero when n/n_i <= e or the value is negative."""
    return _kernels.ucblai_target(plays, n, xi)


def ucblai_index(stats: ArmStats, n: int, xi: float = -0.5) -> float:
    if stats.plays == 0:
        return 1.0
    if n <= stats.plays:
        raise ValueError("total plays must exceed the arm's plays")
    target = ucblai_target(stats.plays, n, xi)
    return _kernels.kl_upper_bisect(stats.mean, target / stats.plays, 1e-12)


def ucb_tuned_index(stats: ArmStats, t: int) -> float:
    return _kernels.ucb_tuned_value(stats.wins, stats.plays, t)


def ucb2_index(stats: ArmStats, t: int, epochs: int, alpha: float = 0.001) -> float:
    return _kernels.ucb2_value(stats.wins, stats.plays, t, epochs, alpha)


def index_decide(config: PolicyConfig, stats: Sequence[ArmStats], t: int,
                 epochs: Sequence[int] | None = None) -> Decision:
    """Argmax of an index policy's values; unplayed arms come first."""
    stats = tuple(stats)
    kind = config.kind
    if kind == "kl-ucb":
        scores = [klucb_index(s, max(t, 2), config.c) for s in stats]
    elif kind == "ucb-lai":
        scores = [ucblai_index(s, t, config.xi) if 0 < s.plays < t else (1.0 if s.plays == 0 else s.mean)
                  for s in stats]
    elif kind == "ucb-tuned":
        scores = [ucb_tuned_index(s, t) for s in stats]
    elif kind == "ucb2":
        epochs = epochs if epochs is not None else [0] * len(stats)
        scores = [ucb2_index(s, t, r, config.alpha) for s, r in zip(stats, epochs)]
    else:
        raise ValueError(f"{kind} is not an index policy")
    scores = np.array(scores, dtype=float)
    unplayed = [i for i, s in enumerate(stats) if s.plays == 0]
    if unplayed:
        return Decision(unplayed[0], scores, len(unplayed) > 1)
    return _maximizing(scores)


def decide(config: PolicyConfig, stats: Sequence[ArmStats], *, grid: BeliefGrid | None = None,
           rng: np.random.Generator | None = None, t: int | None = None) -> Decision:
    """Dispatch on the configured policy kind."""
    stats = tuple(stats)
    if config.kind == "info-p":
        return infop_decide(stats, grid, config.grid)
    if config.kind == "info-id":
        return infoid_decide(stats, grid, config.grid)
    if config.kind == "max-ent":
        return maxent_decide(stats, grid, config.grid)
    if config.kind == "thompson":
        if rng is None:
            raise ValueError("thompson needs a random generator")
        return thompson_decide(stats, rng, grid, config.grid)
    return index_decide(config, stats, t if t is not None else sum(s.plays for s in stats))
