"""Bernoulli environment with reward and regret bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream owned by one realization."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def expected_regret(probs: Sequence[float], plays: Sequence[int]) -> float:
    """sum_i n_i (p_best - p_i), summed without rounding drift."""
    top = max(probs)
    return math.fsum(int(n) * (top - p) for p, n in zip(probs, plays))


@dataclass
class BanditEnv:
    probs: tuple
    rng: np.random.Generator
    plays: np.ndarray = field(init=False)
    wins: np.ndarray = field(init=False)

    def __post_init__(self):
        self.probs = tuple(float(p) for p in self.probs)
        if not self.probs:
            raise ValueError("need at least one arm")
        if any(not 0.0 <= p <= 1.0 for p in self.probs):
            raise ValueError("success probabilities must lie in [0, 1]")
        self.plays = np.zeros(len(self.probs), dtype=np.int64)
        self.wins = np.zeros(len(self.probs), dtype=np.int64)

    @property
    def k(self) -> int:
        return len(self.probs)

    @property
    def best(self) -> int:
        return int(np.argmax(self.probs))

    @property
    def reward(self) -> int:
        return int(self.wins.sum())

    @property
    def regret(self) -> float:
        return expected_regret(self.probs, self.plays)

    def pull(self, arm: int) -> bool:
        win = bool(self.rng.random() < self.probs[arm])
        self.plays[arm] += 1
        self.wins[arm] += win
        return win

    def pull_batch(self, arm: int, length: int) -> int:
        wins = int(self.rng.binomial(length, self.probs[arm]))
        self.plays[arm] += length
        self.wins[arm] += wins
        return wins
