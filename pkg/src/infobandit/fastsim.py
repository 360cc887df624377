"""Exact and near-exact shortcuts over long runs of one arm.

Deterministic rules (Info-p) use worst-case stretch bounds: if the rule
still picks an arm after every one of L plays came out a loss, it picks
it along any outcome sequence of that length. `LeaderRun` extends this by
tabulating, for a handful of run lengths j, the fewest wins kappa(j) that
keep the arm chosen, and stepping outcomes one by one while the running
win count stays above a chord bound on kappa. Thompson sampling uses
exponential stretch lengths drawn from the current best-arm probability.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from infobandit import _kernels
from infobandit.belief import DEFAULT_SETTINGS, BestArmBelief, GridSettings, _key_tuple, layout
from infobandit.core import ArmStats, log_beta_fn, record_batch
from infobandit.env import BanditEnv


@dataclass(frozen=True)
class Stretch:
    arm: int
    length: int
    wins: int | None = None

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("a stretch has at least one play")
        if self.wins is not None and not 0 <= self.wins <= self.length:
            raise ValueError("wins must lie in [0, length]")


def _with_plays(stats: Sequence[ArmStats], arm: int, plays: int, wins: int) -> tuple:
    out = list(stats)
    out[arm] = record_batch(out[arm], plays, wins)
    return tuple(out)


def stretch_lower_bound(decide: Callable[[tuple], int], stats: Sequence[ArmStats], arm: int,
                        initial_guess: int = 16, cap: int | None = None) -> int:
    """Number of plays of `arm` the rule is guaranteed to make in a row.

    `decide` maps arm statistics to the chosen arm and must pick `arm` now.
    The guarantee comes from the all-losses path: the returned L is such
    that the rule still picks `arm` after each of 0..L-1 forced losses.
    The search doubles or halves the guess, then bisects.
    """
    stats = tuple(stats)

    def holds(losses):
        return decide(_with_plays(stats, arm, losses, 0)) == arm

    if cap is not None and cap < 1:
        raise ValueError("cap must be positive")
    guess = max(1, int(initial_guess))
    if cap is not None:
        guess = min(guess, cap - 1) if cap > 1 else 0
    good, bad = 0, None
    if guess > 0 and holds(guess):
        good = guess
        while True:
            nxt = good * 2
            if cap is not None and nxt >= cap - 1:
                if holds(cap - 1):
                    return cap
                bad = cap - 1
                break
            if holds(nxt):
                good = nxt
            else:
                bad = nxt
                break
    elif guess > 0:
        bad = guess
        probe = guess // 2
        while probe > 0:
            if holds(probe):
                good = probe
                break
            bad = probe
            probe //= 2
    else:
        return 1
    while bad - good > 1:
        mid = (good + bad) // 2
        if holds(mid):
            good = mid
        else:
            bad = mid
    return good + 1


def play_stretch(env: BanditEnv, stats: Sequence[ArmStats], stretch: Stretch,
                 rng: np.random.Generator | None = None) -> tuple[Stretch, tuple]:
    """Draw the wins of a whole stretch at once and update the arm in one step."""
    stats = tuple(stats)
    if rng is not None and rng is not env.rng:
        wins = int(rng.binomial(stretch.length, env.probs[stretch.arm]))
        env.plays[stretch.arm] += stretch.length
        env.wins[stretch.arm] += wins
    else:
        wins = env.pull_batch(stretch.arm, stretch.length)
    done = Stretch(stretch.arm, stretch.length, wins)
    return done, _with_plays(stats, stretch.arm, stretch.length, wins)


def thompson_stretch(belief: BestArmBelief, rng: np.random.Generator) -> tuple[Stretch, int]:
    """Run of the most probable best arm, then the arm that interrupts it.

    The run length is an exponential draw of mean 1/(1 - q_max), rounded up;
    the interrupting arm is drawn with probabilities q_j/(1 - q_max).
    """
    q = np.asarray(belief.q, dtype=float)
    top = int(np.argmax(q))
    if q[top] <= 0.5:
        raise ValueError("stretch sampling needs q_max > 1/2")
    rest = -math.expm1(belief.log_q[top]) if belief.log_q[top] < 0 else 0.0
    if rest <= 0.0:
        length = np.iinfo(np.int64).max // 4
    else:
        length = max(1, math.ceil(rng.exponential(1.0 / rest)))
        length = min(length, np.iinfo(np.int64).max // 4)
    others = [i for i in range(q.size) if i != top]
    if len(others) == 1:
        nxt = others[0]
    else:
        logs = np.array([belief.log_q[i] for i in others])
        weights = np.exp(logs - special.logsumexp(logs))
        nxt = others[int(rng.choice(len(others), p=weights / weights.sum()))]
    return Stretch(top, int(length)), nxt


class InfoPProbe:
    """Info-p decisions at states where only one arm's counters moved."""

    def __init__(self, w: np.ndarray, n: np.ndarray, arm: int,
                 settings: GridSettings = DEFAULT_SETTINGS):
        self.w = np.array(w, dtype=np.int64)
        self.n = np.array(n, dtype=np.int64)
        self.arm = arm
        self.settings = settings
        self.calls = 0
        self._cache = {}

    def chosen(self, wins: int, plays: int) -> int:
        self.calls += 1
        w = self.w.copy()
        n = self.n.copy()
        w[self.arm] += wins
        n[self.arm] += plays
        key = _key_tuple(_kernels.state_keys(w, n, *self.settings.key_args()))
        entry = self._cache.get(key)
        if entry is None:
            nodes, wq = layout(key, w.size, self.settings)
            P = np.empty((w.size, nodes.size))
            F = np.empty_like(P)
            for i in range(w.size):
                if i != self.arm:
                    a, b = w[i] + 1.0, n[i] - w[i] + 1.0
                    with np.errstate(divide="ignore"):
                        P[i] = np.exp(special.xlogy(a - 1, nodes) + special.xlog1py(b - 1, -nodes)
                                      - log_beta_fn(a, b))
                    F[i] = special.betainc(a, b, nodes)
            entry = (nodes, wq, P, F)
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[key] = entry
        nodes, wq, P, F = entry
        a = (w + 1.0).astype(float)
        b = (n - w + 1.0).astype(float)
        i = self.arm
        with np.errstate(divide="ignore"):
            P[i] = np.exp(special.xlogy(a[i] - 1, nodes) + special.xlog1py(b[i] - 1, -nodes)
                          - log_beta_fn(a[i], b[i]))
        F[i] = special.betainc(a[i], b[i], nodes)
        scores = np.empty(w.size)
        _kernels.infop_scores(nodes, wq, P, F, a, b, scores)
        return int(_kernels.argmin_first(scores))

    def decide(self, stats: Sequence[ArmStats]) -> int:
        """Adapter for stretch_lower_bound: stats differ from the base only at `arm`."""
        s = stats[self.arm]
        return self.chosen(s.wins - int(self.w[self.arm]), s.plays - int(self.n[self.arm]))

    def base_stats(self) -> tuple:
        return tuple(ArmStats(int(a), int(b)) for a, b in zip(self.w, self.n))


def _first_true(pred, lo: int, hi: int, guess: int) -> int:
    """Smallest x in [lo, hi] with pred(x) for a monotone pred; hi + 1 if none."""
    g = min(max(guess, lo), hi)
    if pred(g):
        top, bottom, step = g, lo - 1, 1
        while top - step >= lo:
            x = top - step
            if pred(x):
                top = x
                step *= 2
            else:
                bottom = x
                break
    else:
        bottom, top, step = g, hi + 1, 1
        while bottom + step <= hi:
            x = bottom + step
            if pred(x):
                top = x
                break
            bottom = x
            step *= 2
    while top - bottom > 1:
        mid = (top + bottom) // 2
        if pred(mid):
            top = mid
        else:
            bottom = mid
    return top


class LeaderRun:
    """Consecutive plays of one arm, certified against the rule's decisions.

    kappa(j) is the fewest wins among the first j plays for which the rule
    still picks the arm before play j + 1. At fixed j more wins only help
    the arm, so kappa is a threshold; between tabulated run lengths the
    chord of kappa bounds it from above when kappa is convex, which is
    checked at every newly tabulated point. A failed check switches the
    run to exact evaluation at every step it cannot certify otherwise.
    """

    margin = 2

    def __init__(self, probe: InfoPProbe, max_steps: int, initial_guess: int = 16):
        if max_steps < 1:
            raise ValueError("max_steps must be positive")
        self.probe = probe
        self.max_steps = max_steps
        self.j = 0
        self.k = 0
        self.ended = False
        self.use_chords = True
        self.convexity_failures = 0
        self.a1_length = stretch_lower_bound(probe.decide, probe.base_stats(), probe.arm,
                                             initial_guess, cap=max_steps)
        self._pts_j = [0]
        self._pts_kappa = [0]
        if self.a1_length > 1:
            self._insert(self.a1_length - 1, 0)

    def _chosen(self, wins, plays):
        return self.probe.chosen(wins, plays) == self.probe.arm

    def kappa(self, j: int) -> int:
        pos = bisect.bisect_left(self._pts_j, j)
        if pos < len(self._pts_j) and self._pts_j[pos] == j:
            return self._pts_kappa[pos]
        guess = self._extrapolate(j)
        return _first_true(lambda k: self._chosen(k, j), 0, j, guess)

    def _extrapolate(self, j):
        pj, pk = self._pts_j, self._pts_kappa
        pos = bisect.bisect_left(pj, j)
        if 0 < pos < len(pj):
            a, b = pos - 1, pos
        elif len(pj) >= 2:
            a, b = len(pj) - 2, len(pj) - 1
        else:
            return 0
        return int(round(pk[a] + (pk[b] - pk[a]) * (j - pj[a]) / (pj[b] - pj[a])))

    def _insert(self, j, kap):
        pos = bisect.bisect_left(self._pts_j, j)
        if pos < len(self._pts_j) and self._pts_j[pos] == j:
            return
        self._pts_j.insert(pos, j)
        self._pts_kappa.insert(pos, kap)
        pj, pk = self._pts_j, self._pts_kappa
        for mid in range(max(1, pos - 1), min(len(pj) - 1, pos + 2)):
            a, b = mid - 1, mid + 1
            chord = pk[a] + (pk[b] - pk[a]) * (pj[mid] - pj[a]) / (pj[b] - pj[a])
            if pk[mid] > chord + 1:
                self.use_chords = False
                self.convexity_failures += 1

    def advance(self, steps_left: int, p: float, rng: np.random.Generator) -> tuple[int, int]:
        """Play up to steps_left plays; returns (plays, wins) made by this call."""
        j0, k0 = self.j, self.k
        looked_ahead = False
        steps_left = min(steps_left, self.max_steps - self.j)
        while steps_left > 0 and not self.ended:
            status, j, k, steps = _kernels.track_leader(
                self.j, self.k, np.array(self._pts_j, dtype=np.int64),
                np.array(self._pts_kappa, dtype=np.int64), len(self._pts_j),
                self.use_chords, self.margin, p, rng, steps_left)
            self.j, self.k = j, k
            steps_left -= steps
            if steps > 0:
                looked_ahead = False
            if status == 0:
                break
            if j > self._pts_j[-1] and not looked_ahead and self.use_chords:
                self._look_ahead(j)
                looked_ahead = True
                continue
            kap = self.kappa(j)
            if kap <= j:
                self._insert(j, kap)
            if k < kap:
                self.ended = True
        if self.j >= self.max_steps:
            self.ended = True
        return self.j - j0, self.k - k0

    def _look_ahead(self, j):
        last = self._pts_j[-1]
        span = max(64, last - self._pts_j[0])
        while True:
            target = min(max(last + span, j), self.max_steps)
            kap = self.kappa(target)
            if kap <= target or target <= j:
                break
            span //= 2
        if kap <= target:
            self._insert(target, kap)
